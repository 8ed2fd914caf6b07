#include "doq/algopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "doq/rng.hpp"

namespace doq {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double clamp(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

void clamp_into(std::vector<double>& x, const Box& box) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = clamp(x[i], box.lo[i], box.hi[i]);
}

// Out-of-box trial points are reflected back inside rather than clamped:
// clamping pins whole simplices onto a face, after which reflections lose
// that coordinate direction entirely.
void reflect_into(std::vector<double>& x, const Box& box) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    double v = x[i];
    if (v < box.lo[i]) v = box.lo[i] + (box.lo[i] - v);
    if (v > box.hi[i]) v = box.hi[i] - (v - box.hi[i]);
    if (v < box.lo[i] || v > box.hi[i]) v = 0.5 * (box.lo[i] + box.hi[i]);
    x[i] = v;
  }
}

// Gaussian elimination with partial pivoting; returns false when the system
// is numerically singular.
bool solve_linear(std::vector<double> a, std::vector<double> b, std::size_t n,
                  std::vector<double>& out) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    double best = std::fabs(a[col * n + col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double v = std::fabs(a[r * n + col]);
      if (v > best) {
        best = v;
        pivot = r;
      }
    }
    if (!(best > 1e-30)) return false;
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
      std::swap(b[col], b[pivot]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double factor = a[r * n + col] / a[col * n + col];
      if (factor == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= factor * a[col * n + c];
      b[r] -= factor * b[col];
    }
  }
  out.assign(n, 0.0);
  for (std::size_t ri = n; ri-- > 0;) {
    double s = b[ri];
    for (std::size_t c = ri + 1; c < n; ++c) s -= a[ri * n + c] * out[c];
    out[ri] = s / a[ri * n + ri];
  }
  for (double v : out) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Bounded derivative-free maximization
// ---------------------------------------------------------------------------

BoxMaximizeResult maximize_in_box(const std::function<double(const std::vector<double>&)>& f,
                                  const std::vector<double>& start, const Box& box,
                                  double tolerance, int max_evals) {
  const std::size_t n = box.dim();
  if (n == 0 || box.hi.size() != n) fail("maximize_in_box: bad box");
  if (start.size() != n) fail("maximize_in_box: start dimension mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(box.hi[i] > box.lo[i])) fail("maximize_in_box: box must have hi > lo");
  }
  if (max_evals < 1) fail("maximize_in_box: max_evals must be >= 1");

  BoxMaximizeResult result;
  int evals = 0;
  const auto eval = [&](const std::vector<double>& x) -> double {
    ++evals;
    double v;
    try {
      v = f(x);
    } catch (const std::invalid_argument&) {
      return kNegInf;
    }
    return std::isnan(v) ? kNegInf : v;
  };

  std::vector<double> best_x = start;
  clamp_into(best_x, box);
  double best_f = eval(best_x);

  // Reserve evaluations for the quadratic polish: two passes of a full
  // central-difference stencil plus the candidate points.
  const int polish_cost = static_cast<int>(2 * n * n + 2 * n + 2);
  const int nm_budget = std::max(0, max_evals - 2 * polish_cost);

  // --- Nelder-Mead, maximizing, candidates clamped into the box ----------
  const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;
  std::vector<std::vector<double>> vx(n + 1, best_x);
  std::vector<double> vf(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    double step = 0.10 * (box.hi[i] - box.lo[i]);
    if (vx[i + 1][i] + step > box.hi[i]) step = -step;
    vx[i + 1][i] = clamp(vx[i + 1][i] + step, box.lo[i], box.hi[i]);
  }
  vf[0] = best_f;
  for (std::size_t i = 1; i <= n && evals < nm_budget; ++i) vf[i] = eval(vx[i]);

  const auto record_best = [&](const std::vector<double>& x, double fx) {
    if (fx > best_f) {
      best_f = fx;
      best_x = x;
    }
  };
  for (std::size_t i = 1; i <= n; ++i) record_best(vx[i], vf[i]);

  std::vector<std::size_t> order(n + 1);
  while (evals + 2 < nm_budget) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return vf[a] > vf[b]; });
    const std::size_t i_best = order[0];
    const std::size_t i_second_worst = order[n == 0 ? 0 : n - 1];
    const std::size_t i_worst = order[n];

    const double spread = vf[i_best] - vf[i_worst];
    if (std::isfinite(spread) && spread <= tolerance * (std::fabs(vf[i_best]) + tolerance)) {
      break;
    }

    std::vector<double> centroid(n, 0.0);
    for (std::size_t v = 0; v <= n; ++v) {
      if (v == i_worst) continue;
      for (std::size_t i = 0; i < n; ++i) centroid[i] += vx[v][i];
    }
    for (double& c : centroid) c /= static_cast<double>(n);

    std::vector<double> xr(n);
    for (std::size_t i = 0; i < n; ++i) xr[i] = centroid[i] + alpha * (centroid[i] - vx[i_worst][i]);
    reflect_into(xr, box);
    const double fr = eval(xr);
    record_best(xr, fr);

    if (fr > vf[i_best]) {
      std::vector<double> xe(n);
      for (std::size_t i = 0; i < n; ++i) xe[i] = centroid[i] + gamma * (xr[i] - centroid[i]);
      reflect_into(xe, box);
      const double fe = eval(xe);
      record_best(xe, fe);
      if (fe > fr) {
        vx[i_worst] = std::move(xe);
        vf[i_worst] = fe;
      } else {
        vx[i_worst] = std::move(xr);
        vf[i_worst] = fr;
      }
    } else if (fr > vf[i_second_worst]) {
      vx[i_worst] = std::move(xr);
      vf[i_worst] = fr;
    } else {
      std::vector<double> xc(n);
      const bool outside = fr > vf[i_worst];
      const std::vector<double>& toward = outside ? xr : vx[i_worst];
      for (std::size_t i = 0; i < n; ++i) xc[i] = centroid[i] + rho * (toward[i] - centroid[i]);
      reflect_into(xc, box);
      const double fc = eval(xc);
      record_best(xc, fc);
      if (fc > (outside ? fr : vf[i_worst])) {
        vx[i_worst] = std::move(xc);
        vf[i_worst] = fc;
      } else {
        for (std::size_t v = 0; v <= n; ++v) {
          if (v == i_best) continue;
          for (std::size_t i = 0; i < n; ++i) {
            vx[v][i] = vx[i_best][i] + sigma * (vx[v][i] - vx[i_best][i]);
          }
          if (evals >= nm_budget) {
            vf[v] = kNegInf;
            continue;
          }
          vf[v] = eval(vx[v]);
          record_best(vx[v], vf[v]);
        }
      }
    }
  }

  // --- Quadratic polish ----------------------------------------------------
  // Fit a quadratic surface by central differences around the best point and
  // jump to its stationary point. Comparison-based search stalls once the
  // objective differences fall below rounding, at roughly sqrt(eps) away from
  // a smooth optimum; the fitted jump is exact on quadratics, which is what
  // makes the k-means special case land on cell means to ~1e-11.
  for (int pass = 0; pass < 2 && !std::isinf(best_f); ++pass) {
    if (evals + polish_cost > max_evals) break;

    std::vector<double> h(n);
    bool stencil_ok = true;
    for (std::size_t i = 0; i < n; ++i) {
      const double span = box.hi[i] - box.lo[i];
      const double room = std::min(box.hi[i] - best_x[i], best_x[i] - box.lo[i]);
      h[i] = std::min(1e-4 * span, 0.5 * room);
      if (!(h[i] > 0.0)) {
        stencil_ok = false;  // on the boundary: the unconstrained fit does not apply
        break;
      }
    }
    if (!stencil_ok) break;

    std::vector<double> grad(n), hess(n * n);
    std::vector<double> xp = best_x;
    bool values_ok = true;
    for (std::size_t i = 0; i < n && values_ok; ++i) {
      xp[i] = best_x[i] + h[i];
      const double fp = eval(xp);
      xp[i] = best_x[i] - h[i];
      const double fm = eval(xp);
      xp[i] = best_x[i];
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        values_ok = false;
        break;
      }
      grad[i] = (fp - fm) / (2.0 * h[i]);
      hess[i * n + i] = (fp - 2.0 * best_f + fm) / (h[i] * h[i]);
    }
    for (std::size_t i = 0; i < n && values_ok; ++i) {
      for (std::size_t j = i + 1; j < n && values_ok; ++j) {
        xp[i] = best_x[i] + h[i];
        xp[j] = best_x[j] + h[j];
        const double fpp = eval(xp);
        xp[j] = best_x[j] - h[j];
        const double fpm = eval(xp);
        xp[i] = best_x[i] - h[i];
        const double fmm = eval(xp);
        xp[j] = best_x[j] + h[j];
        const double fmp = eval(xp);
        xp[i] = best_x[i];
        xp[j] = best_x[j];
        if (!std::isfinite(fpp) || !std::isfinite(fpm) || !std::isfinite(fmm) ||
            !std::isfinite(fmp)) {
          values_ok = false;
          break;
        }
        const double cross = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
        hess[i * n + j] = cross;
        hess[j * n + i] = cross;
      }
    }
    if (!values_ok) break;

    std::vector<double> neg_grad(n);
    for (std::size_t i = 0; i < n; ++i) neg_grad[i] = -grad[i];
    std::vector<double> delta;
    if (!solve_linear(hess, neg_grad, n, delta)) break;

    std::vector<double> cand = best_x;
    for (std::size_t i = 0; i < n; ++i) cand[i] += delta[i];
    clamp_into(cand, box);
    const double f_cand = eval(cand);
    // Accept within an ulp-scale band: near a smooth optimum the candidate is
    // mathematically at least as good, but the comparison itself saturates.
    const double tie_band = 64.0 * std::numeric_limits<double>::epsilon() *
                            (1.0 + std::fabs(best_f));
    if (!(f_cand >= best_f - tie_band)) break;

    double step2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) step2 += (cand[i] - best_x[i]) * (cand[i] - best_x[i]);
    best_x = std::move(cand);
    best_f = f_cand;
    if (step2 < 1e-24) break;
  }

  result.x = std::move(best_x);
  result.value = best_f;
  result.evals = evals;
  return result;
}

// ---------------------------------------------------------------------------
// Cell and representative updates
// ---------------------------------------------------------------------------

std::vector<int> update_cells(const UtilityModel& model, const DecisionSet& d,
                              const SampleSet& samples) {
  if (d.decisions.empty()) fail("update_cells: empty decision set");
  std::vector<int> labels(samples.size());
  for (std::size_t t = 0; t < samples.size(); ++t) {
    try {
      labels[t] = argmax_decision(model, d, samples.params[t]);
    } catch (const std::invalid_argument& e) {
      fail("update_cells: sample " + std::to_string(t) + ": " + e.what());
    }
  }
  return labels;
}

namespace {

std::vector<std::vector<std::size_t>> cell_members(const std::vector<int>& labels,
                                                   std::size_t m) {
  std::vector<std::vector<std::size_t>> members(m);
  for (std::size_t t = 0; t < labels.size(); ++t) {
    const int k = labels[t];
    if (k < 0 || static_cast<std::size_t>(k) >= m) fail("labels out of range");
    members[static_cast<std::size_t>(k)].push_back(t);
  }
  return members;
}

double cell_mean_utility(const UtilityModel& model, const Decision& d,
                         const SampleSet& samples, const std::vector<std::size_t>& members) {
  KahanSum s;
  for (std::size_t t : members) s.add(model.evaluate(d, samples.params[t]));
  return s.value() / static_cast<double>(members.size());
}

}  // namespace

DecisionSet update_representatives(const UtilityModel& model, const SampleSet& samples,
                                   const std::vector<int>& labels,
                                   const DecisionSet& incumbent,
                                   const RepresentativeMode& mode) {
  if (labels.size() != samples.size()) fail("update_representatives: label/sample mismatch");
  const std::size_t m = incumbent.size();
  if (m == 0) fail("update_representatives: empty incumbent set");
  const auto members = cell_members(labels, m);

  DecisionSet out;
  out.decisions.reserve(m);

  if (const auto* discrete = std::get_if<DiscreteCandidates>(&mode)) {
    const DecisionSet& cand = discrete->candidates;
    if (cand.decisions.empty()) fail("update_representatives: no candidates");
    for (std::size_t k = 0; k < m; ++k) {
      if (members[k].empty()) {
        out.decisions.push_back(incumbent.decisions[k]);
        continue;
      }
      std::size_t best = 0;
      double best_u = cell_mean_utility(model, cand.decisions[0], samples, members[k]);
      for (std::size_t c = 1; c < cand.size(); ++c) {
        const double u = cell_mean_utility(model, cand.decisions[c], samples, members[k]);
        if (u > best_u) {
          best_u = u;
          best = c;
        }
      }
      out.decisions.push_back(cand.decisions[best]);
    }
    return out;
  }

  const auto& cs = std::get<ContinuousSearch>(mode);
  const bool on_simplex = std::holds_alternative<SumRateConfig>(model.config);
  const double simplex_total =
      on_simplex ? std::get<SumRateConfig>(model.config).p_total : 0.0;

  for (std::size_t k = 0; k < m; ++k) {
    if (members[k].empty()) {
      out.decisions.push_back(incumbent.decisions[k]);
      continue;
    }
    const auto* inc_pv = std::get_if<PowerVector>(&incumbent.decisions[k]);
    if (!inc_pv) fail("continuous search requires power-vector decisions");

    const std::vector<std::size_t>& cell = members[k];
    const auto objective = [&](const std::vector<double>& x) -> double {
      std::vector<double> p = x;
      if (on_simplex) p = project_to_simplex(p, simplex_total);
      KahanSum s;
      const Decision d = PowerVector{std::move(p)};
      for (std::size_t t : cell) s.add(model.evaluate(d, samples.params[t]));
      return s.value() / static_cast<double>(cell.size());
    };

    std::vector<double> start = inc_pv->powers;
    const double f_incumbent = [&]() {
      try {
        return objective(start);
      } catch (const std::invalid_argument&) {
        return kNegInf;
      }
    }();

    BoxMaximizeResult res = maximize_in_box(objective, start, cs.bounds, cs.tolerance,
                                            cs.max_evals);
    // Reject-on-decrease: the incumbent survives unless the search did at
    // least as well, which keeps the outer iteration monotone.
    if (res.value >= f_incumbent && std::isfinite(res.value)) {
      if (on_simplex) res.x = project_to_simplex(res.x, simplex_total);
      out.decisions.push_back(PowerVector{std::move(res.x)});
    } else {
      out.decisions.push_back(incumbent.decisions[k]);
    }
  }
  return out;
}

DecisionSet make_initial_decisions(const UtilityModel& model, const SampleSet& samples,
                                   const AlternatingConfig& cfg) {
  if (cfg.m < 1) fail("make_initial_decisions: m must be >= 1");
  if (samples.size() == 0) fail("make_initial_decisions: empty sample set");
  Rng rng(cfg.seed);

  if (const auto* discrete = std::get_if<DiscreteCandidates>(&cfg.mode)) {
    const DecisionSet& cand = discrete->candidates;
    if (cand.size() < cfg.m) fail("make_initial_decisions: fewer candidates than m");

    const std::vector<int> labels = update_cells(model, cand, samples);
    std::vector<std::uint8_t> used(cand.size(), 0);
    for (int l : labels) used[static_cast<std::size_t>(l)] = 1;
    std::vector<std::size_t> occurring, idle;
    for (std::size_t c = 0; c < cand.size(); ++c) {
      (used[c] ? occurring : idle).push_back(c);
    }

    const auto draw = [&](std::vector<std::size_t>& pool, std::size_t want,
                          std::vector<std::size_t>& into) {
      for (std::size_t i = 0; i < want && i < pool.size(); ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
        std::swap(pool[i], pool[j]);
        into.push_back(pool[i]);
      }
    };
    std::vector<std::size_t> picked;
    draw(occurring, cfg.m, picked);
    if (picked.size() < cfg.m) draw(idle, cfg.m - picked.size(), picked);

    DecisionSet init;
    for (std::size_t c : picked) init.decisions.push_back(cand.decisions[c]);
    return init;
  }

  const auto& cs = std::get<ContinuousSearch>(cfg.mode);
  const std::size_t dim = cs.bounds.dim();
  std::vector<double> center(dim);
  for (std::size_t i = 0; i < dim; ++i) center[i] = 0.5 * (cs.bounds.lo[i] + cs.bounds.hi[i]);

  DecisionSet init;
  int attempts = 0;
  while (init.size() < cfg.m && attempts < 64) {
    ++attempts;
    const std::size_t t = static_cast<std::size_t>(rng.below(samples.size()));
    const auto objective = [&](const std::vector<double>& x) {
      std::vector<double> p = x;
      if (const auto* sr = std::get_if<SumRateConfig>(&model.config)) {
        p = project_to_simplex(p, sr->p_total);
      }
      return model.evaluate(PowerVector{std::move(p)}, samples.params[t]);
    };
    BoxMaximizeResult res = maximize_in_box(objective, center, cs.bounds, cs.tolerance,
                                            cs.max_evals);
    if (const auto* sr = std::get_if<SumRateConfig>(&model.config)) {
      res.x = project_to_simplex(res.x, sr->p_total);
    }
    bool duplicate = false;
    for (const auto& d : init.decisions) {
      if (decision_displacement2(d, PowerVector{res.x}) < 1e-16) {
        duplicate = true;
        break;
      }
    }
    if (duplicate) {  // nudge deterministically instead of discarding the draw
      for (std::size_t i = 0; i < dim; ++i) {
        res.x[i] += (rng.uniform01() - 0.5) * 1e-3 * (cs.bounds.hi[i] - cs.bounds.lo[i]);
      }
      clamp_into(res.x, cs.bounds);
    }
    init.decisions.push_back(PowerVector{std::move(res.x)});
  }
  if (init.size() != cfg.m) fail("make_initial_decisions: could not build m distinct decisions");
  return init;
}

double mean_labeled_utility(const UtilityModel& model, const DecisionSet& d,
                            const std::vector<int>& labels, const SampleSet& samples) {
  if (labels.size() != samples.size()) fail("mean_labeled_utility: label/sample mismatch");
  KahanSum s;
  for (std::size_t t = 0; t < samples.size(); ++t) {
    s.add(model.evaluate(d.decisions[static_cast<std::size_t>(labels[t])], samples.params[t]));
  }
  return s.value() / static_cast<double>(samples.size());
}

AlternatingReport doq_alternate(const UtilityModel& model, const SampleSet& samples,
                                const AlternatingConfig& cfg, const DecisionSet& init) {
  if (init.size() != cfg.m) fail("doq_alternate: |init| must equal cfg.m");
  if (cfg.t_max < 1) fail("doq_alternate: t_max must be >= 1");
  if (!(cfg.epsilon >= 0.0)) fail("doq_alternate: epsilon must be >= 0");
  if (samples.size() == 0) fail("doq_alternate: empty sample set");

  AlternatingReport report;
  DecisionSet decisions = init;
  std::vector<int> labels = update_cells(model, decisions, samples);
  if (cfg.record_label_trace) report.label_trace.push_back(labels);

  for (int iter = 1; iter <= cfg.t_max; ++iter) {
    report.iterations = iter;
    DecisionSet updated = update_representatives(model, samples, labels, decisions, cfg.mode);
    double displacement2 = 0.0;
    for (std::size_t k = 0; k < cfg.m; ++k) {
      displacement2 += decision_displacement2(updated.decisions[k], decisions.decisions[k]);
    }
    decisions = std::move(updated);
    labels = update_cells(model, decisions, samples);
    if (cfg.record_label_trace) report.label_trace.push_back(labels);
    report.utility_history.push_back(mean_labeled_utility(model, decisions, labels, samples));

    if (displacement2 <= cfg.epsilon) {
      report.converged = true;
      break;
    }
  }

  report.final_decisions = std::move(decisions);
  report.labels = std::move(labels);
  return report;
}

// ---------------------------------------------------------------------------
// k-means baseline
// ---------------------------------------------------------------------------

std::vector<std::vector<double>> kmeans_seed_representatives(
    const std::vector<std::vector<double>>& features, std::size_t k, std::uint64_t seed) {
  if (k < 1) fail("kmeans: k must be >= 1");
  if (features.empty()) fail("kmeans: no features");

  // Distinct feature values in lexicographic order, then a seeded partial
  // Fisher-Yates to pick k of them.
  std::vector<std::size_t> order(features.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return features[a] < features[b]; });
  std::vector<std::size_t> distinct;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i == 0 || features[order[i]] != features[order[i - 1]]) distinct.push_back(order[i]);
  }
  if (distinct.size() < k) fail("kmeans: k exceeds the number of distinct feature vectors");

  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(distinct.size() - i));
    std::swap(distinct[i], distinct[j]);
  }
  std::vector<std::vector<double>> reps;
  reps.reserve(k);
  for (std::size_t i = 0; i < k; ++i) reps.push_back(features[distinct[i]]);
  return reps;
}

namespace {

std::vector<int> kmeans_assign(const std::vector<std::vector<double>>& features,
                               const std::vector<std::vector<double>>& reps) {
  std::vector<int> labels(features.size());
  for (std::size_t t = 0; t < features.size(); ++t) {
    labels[t] = nearest_representative(reps, features[t]);
  }
  return labels;
}

double kmeans_wcss(const std::vector<std::vector<double>>& features,
                   const std::vector<std::vector<double>>& reps,
                   const std::vector<int>& labels) {
  KahanSum s;
  for (std::size_t t = 0; t < features.size(); ++t) {
    s.add(squared_distance(features[t], reps[static_cast<std::size_t>(labels[t])]));
  }
  return s.value();
}

}  // namespace

CellQuantizer kmeans_fit(const std::vector<std::vector<double>>& features, std::size_t k,
                         int iters, std::uint64_t seed, KmeansTrace* trace) {
  if (iters < 1) fail("kmeans: iters must be >= 1");
  std::vector<std::vector<double>> reps = kmeans_seed_representatives(features, k, seed);
  std::vector<int> labels = kmeans_assign(features, reps);
  if (trace) {
    trace->labels.push_back(labels);
    trace->wcss.push_back(kmeans_wcss(features, reps, labels));
  }

  const std::size_t dim = features.front().size();
  for (int it = 0; it < iters; ++it) {
    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t t = 0; t < features.size(); ++t) {
      const auto c = static_cast<std::size_t>(labels[t]);
      ++counts[c];
      for (std::size_t i = 0; i < dim; ++i) sums[c][i] += features[t][i];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (std::size_t i = 0; i < dim; ++i) {
          sums[c][i] /= static_cast<double>(counts[c]);
        }
        reps[c] = std::move(sums[c]);
      } else {
        // re-seed an empty cluster at the point farthest from its old
        // representative (ties to the lowest sample index)
        std::size_t far_t = 0;
        double far_d = -1.0;
        for (std::size_t t = 0; t < features.size(); ++t) {
          const double dist = squared_distance(features[t], reps[c]);
          if (dist > far_d) {
            far_d = dist;
            far_t = t;
          }
        }
        reps[c] = features[far_t];
      }
    }

    std::vector<int> next = kmeans_assign(features, reps);
    if (trace) {
      trace->labels.push_back(next);
      trace->wcss.push_back(kmeans_wcss(features, reps, next));
    }
    const bool fixpoint = (next == labels);
    labels = std::move(next);
    if (fixpoint) break;
  }

  CellQuantizer q;
  q.representatives = std::move(reps);
  return q;  // cell decisions are attached separately
}

CellAssignment assign_cell_decisions(const CellQuantizer& q, const UtilityModel& model,
                                     const DecisionSet& d, const SampleSet& samples,
                                     CellDecisionRule rule) {
  if (q.representatives.empty()) fail("assign_cell_decisions: no representatives");
  if (d.decisions.empty()) fail("assign_cell_decisions: empty decision set");
  if (samples.size() == 0) fail("assign_cell_decisions: empty sample set");

  const std::size_t k = q.representatives.size();
  std::vector<int> labels(samples.size());
  for (std::size_t t = 0; t < samples.size(); ++t) {
    labels[t] = nearest_representative(q.representatives, samples.features[t]);
  }
  const auto members = cell_members(labels, k);

  CellAssignment out;
  out.quantizer.representatives = q.representatives;
  out.quantizer.cell_decisions.resize(k);

  for (std::size_t c = 0; c < k; ++c) {
    const bool at_rep = (rule == CellDecisionRule::AtRepresentative) || members[c].empty();
    if (members[c].empty() && rule == CellDecisionRule::CellMeanUtility) {
      out.empty_cells.push_back(static_cast<int>(c));
    }
    if (at_rep) {
      const Parameter rep_param = decode_features(q.representatives[c], samples.params[0]);
      out.quantizer.cell_decisions[c] = argmax_decision(model, d, rep_param);
      continue;
    }
    std::size_t best = 0;
    double best_u = cell_mean_utility(model, d.decisions[0], samples, members[c]);
    for (std::size_t m = 1; m < d.size(); ++m) {
      const double u = cell_mean_utility(model, d.decisions[m], samples, members[c]);
      if (u > best_u) {
        best_u = u;
        best = m;
      }
    }
    out.quantizer.cell_decisions[c] = static_cast<int>(best);
  }
  return out;
}

}  // namespace doq
