#include "doq/evalx.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace doq {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

}  // namespace

PowerVector water_filling(const std::vector<double>& g, const SumRateConfig& cfg) {
  validate(cfg);
  if (g.size() != static_cast<std::size_t>(cfg.n_bands)) {
    fail("water_filling: gain length must equal n_bands");
  }
  for (double gi : g) {
    if (!(gi > 0.0)) fail("water_filling: gains must be > 0");
  }

  // Inverse gains a_i = sigma2/g_i; with the k smallest active the water
  // level is mu_k = (p_total + sum a)/k, valid when it stays above a_k and
  // at most a_{k+1}. Exactly one prefix qualifies.
  const std::size_t n = g.size();
  std::vector<double> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = cfg.sigma2 / g[i];
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a[i] < a[j]; });

  double prefix = 0.0;
  double mu = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    prefix += a[order[k]];
    const double candidate = (cfg.p_total + prefix) / static_cast<double>(k + 1);
    if (candidate > a[order[k]] && (k + 1 == n || candidate <= a[order[k + 1]])) {
      mu = candidate;
      break;
    }
  }
  if (mu == 0.0) mu = (cfg.p_total + prefix) / static_cast<double>(n);  // all active fallback

  PowerVector p;
  p.powers.resize(n);
  for (std::size_t i = 0; i < n; ++i) p.powers[i] = std::max(0.0, mu - a[i]);
  return p;
}

namespace {

double fine_grid_max(const MultiBandEEConfig& cfg, const std::vector<double>& g,
                     const FineGridOracle& spec) {
  if (spec.points_per_band < 1) fail("fine_grid: points_per_band must be >= 1");
  double p_lo = spec.p_lo;
  double p_hi = spec.p_hi;
  if (p_lo == 0.0 && p_hi == 0.0) {
    const double scale = cfg.c * cfg.sigma2;
    if (!(scale > 0.0)) fail("fine_grid: defaults need c*sigma2 > 0, set p_lo/p_hi");
    p_lo = scale / 30.0;
    p_hi = 30.0 * scale;
  }
  if (!(p_lo > 0.0) || !(p_hi > p_lo)) fail("fine_grid: need 0 < p_lo < p_hi");

  // Per-band levels: zero (band off) plus points_per_band log-spaced powers.
  const std::size_t k = static_cast<std::size_t>(spec.points_per_band);
  std::vector<double> levels;
  levels.reserve(k + 1);
  levels.push_back(0.0);
  if (k == 1) {
    levels.push_back(p_lo);
  } else {
    const double ratio = std::log(p_hi / p_lo) / static_cast<double>(k - 1);
    for (std::size_t j = 0; j < k; ++j) {
      levels.push_back(p_lo * std::exp(ratio * static_cast<double>(j)));
    }
  }

  const std::size_t n = static_cast<std::size_t>(cfg.n_bands);
  std::vector<std::size_t> digit(n, 0);
  PowerVector p;
  p.powers.assign(n, 0.0);
  double best = 0.0;
  bool any = false;
  while (true) {
    bool all_zero = true;
    for (std::size_t i = 0; i < n; ++i) {
      p.powers[i] = levels[digit[i]];
      all_zero = all_zero && (digit[i] == 0);
    }
    if (!all_zero) {
      const double u = eval_multiband_ee(p, g, cfg);
      if (!any || u > best) {
        best = u;
        any = true;
      }
    }
    std::size_t pos = 0;
    while (pos < n && ++digit[pos] == levels.size()) {
      digit[pos] = 0;
      ++pos;
    }
    if (pos == n) break;
  }
  return best;
}

}  // namespace

double oracle_utility(const UtilityModel& model, const Parameter& g, const OracleSpec& oracle) {
  return std::visit(
      [&](const auto& spec) -> double {
        using Spec = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<Spec, MaxOverDecisionSet>) {
          if (spec.decisions.decisions.empty()) fail("oracle: empty decision set");
          double best = model.evaluate(spec.decisions[0], g);
          for (std::size_t k = 1; k < spec.decisions.size(); ++k) {
            best = std::max(best, model.evaluate(spec.decisions[k], g));
          }
          return best;
        } else if constexpr (std::is_same_v<Spec, WaterFillingOracle>) {
          const auto* cfg = std::get_if<SumRateConfig>(&model.config);
          if (!cfg) fail("water-filling oracle applies to the sum-rate utility only");
          const auto* gains = std::get_if<std::vector<double>>(&g);
          if (!gains) fail("water-filling oracle expects a gain vector");
          return eval_sum_rate(water_filling(*gains, *cfg), *gains, *cfg);
        } else {
          const auto* cfg = std::get_if<MultiBandEEConfig>(&model.config);
          if (!cfg) fail("fine-grid oracle applies to the multi-band EE utility only");
          const auto* gains = std::get_if<std::vector<double>>(&g);
          if (!gains) fail("fine-grid oracle expects a gain vector");
          return fine_grid_max(*cfg, *gains, spec);
        }
      },
      oracle);
}

double expected_utility(const DecisionalQuantizer& q, const UtilityModel& model,
                        const DecisionSet& d, const SampleSet& samples) {
  if (samples.size() == 0) fail("expected_utility: empty sample set");
  KahanSum s;
  for (std::size_t t = 0; t < samples.size(); ++t) {
    try {
      const int idx = quantize(q, samples.params[t]);
      s.add(model.evaluate(d.decisions[static_cast<std::size_t>(idx)], samples.params[t]));
    } catch (const std::invalid_argument& e) {
      fail("expected_utility: sample " + std::to_string(t) + ": " + e.what());
    }
  }
  return s.value() / static_cast<double>(samples.size());
}

EvaluationReport evaluate_quantizer(const DecisionalQuantizer& q, const UtilityModel& model,
                                    const DecisionSet& d, const SampleSet& samples,
                                    const OracleSpec& oracle) {
  if (samples.size() == 0) fail("evaluate_quantizer: empty sample set");
  if (d.decisions.empty()) fail("evaluate_quantizer: empty decision set");

  EvaluationReport report;
  report.n_samples = samples.size();
  report.seed = samples.seed;
  report.per_decision_counts.assign(d.size(), 0);

  KahanSum mean_q, mean_star, loss, gap;
  for (std::size_t t = 0; t < samples.size(); ++t) {
    int idx = 0;
    double u_q = 0.0, u_star = 0.0;
    try {
      idx = quantize(q, samples.params[t]);
      u_q = model.evaluate(d.decisions[static_cast<std::size_t>(idx)], samples.params[t]);
      u_star = oracle_utility(model, samples.params[t], oracle);
    } catch (const std::invalid_argument& e) {
      fail("evaluate_quantizer: sample " + std::to_string(t) + ": " + e.what());
    }
    if (idx < 0 || static_cast<std::size_t>(idx) >= d.size()) {
      fail("evaluate_quantizer: quantizer index out of range");
    }
    ++report.per_decision_counts[static_cast<std::size_t>(idx)];
    mean_q.add(u_q);
    mean_star.add(u_star);
    gap.add((u_star - u_q) * (u_star - u_q));
    if (u_star == 0.0) {
      ++report.skipped_zero_oracle;  // measure-zero in the supported models
    } else {
      loss.add(std::fabs(u_star - u_q) / u_star);
    }
  }

  const double n = static_cast<double>(samples.size());
  report.expected_utility = mean_q.value() / n;
  report.oracle_expected_utility = mean_star.value() / n;
  report.mean_squared_oracle_gap = gap.value() / n;
  const std::size_t counted = samples.size() - report.skipped_zero_oracle;
  report.relative_loss_pct =
      counted == 0 ? 0.0 : 100.0 * loss.value() / static_cast<double>(counted);
  return report;
}

double relative_loss(const DecisionalQuantizer& q, const UtilityModel& model,
                     const DecisionSet& d, const SampleSet& samples, const OracleSpec& oracle) {
  return evaluate_quantizer(q, model, d, samples, oracle).relative_loss_pct;
}

// ---------------------------------------------------------------------------
// Compression rate
// ---------------------------------------------------------------------------

namespace {

// Designs each budget at most once, in ascending order, and returns the
// per-budget losses needed to answer every query.
std::vector<double> losses_up_to_target(const UtilityModel& model, const SampleSet& samples,
                                        double smallest_target, const QuantizerDesigner& designer,
                                        std::size_t m_cap, const OracleSpec& oracle) {
  std::vector<double> losses;
  losses.reserve(m_cap);
  for (std::size_t m = 1; m <= m_cap; ++m) {
    const DesignedQuantizer designed = designer(m);
    losses.push_back(
        relative_loss(designed.quantizer, model, designed.decisions, samples, oracle));
    if (losses.back() <= smallest_target) break;
  }
  return losses;
}

std::optional<std::size_t> first_at_most(const std::vector<double>& losses, double target) {
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (losses[i] <= target) return i + 1;
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::size_t> min_decisions(const UtilityModel& model, const SampleSet& samples,
                                         double sigma_pct, const QuantizerDesigner& designer,
                                         std::size_t m_cap, const OracleSpec& oracle) {
  if (m_cap < 1) fail("min_decisions: m_cap must be >= 1");
  if (!designer) fail("min_decisions: designer is empty");
  const auto losses = losses_up_to_target(model, samples, sigma_pct, designer, m_cap, oracle);
  return first_at_most(losses, sigma_pct);
}

CompressionCurve compression_curve(const UtilityModel& model, const SampleSet& samples,
                                   const std::vector<double>& sigmas,
                                   const QuantizerDesigner& designer, std::size_t m_cap,
                                   const OracleSpec& oracle) {
  if (sigmas.empty()) fail("compression_curve: no loss targets");
  for (std::size_t i = 0; i + 1 < sigmas.size(); ++i) {
    if (!(sigmas[i] < sigmas[i + 1])) fail("compression_curve: sigmas must be ascending");
  }
  if (m_cap < 1) fail("compression_curve: m_cap must be >= 1");

  const double smallest_target = std::min(1.0, sigmas.front());
  const auto losses = losses_up_to_target(model, samples, smallest_target, designer, m_cap, oracle);

  CompressionCurve curve;
  const auto ref = first_at_most(losses, 1.0);
  curve.reference_is_cap = !ref.has_value();
  curve.reference_m = ref.value_or(m_cap);  // gamma stays defined when M(1%) is out of reach

  for (double sigma : sigmas) {
    CompressionPoint point;
    point.sigma_pct = sigma;
    const auto m = first_at_most(losses, sigma);
    point.achieved = m.has_value();
    point.m_required = m.value_or(m_cap);
    point.gamma = static_cast<double>(curve.reference_m) / static_cast<double>(point.m_required);
    point.loss_pct_at_m = losses[point.m_required - 1];
    curve.points.push_back(point);
  }
  return curve;
}

}  // namespace doq
