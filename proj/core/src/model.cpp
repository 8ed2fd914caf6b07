#include "doq/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "doq/rng.hpp"

namespace doq {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

}  // namespace

// ---------------------------------------------------------------------------
// Config validation
// ---------------------------------------------------------------------------

void validate(const MultiBandEEConfig& cfg) {
  if (cfg.n_bands < 1) fail("multiband_ee: n_bands must be >= 1");
  if (!(cfg.sigma2 > 0.0)) fail("multiband_ee: sigma2 must be > 0");
  if (!(cfg.c >= 0.0)) fail("multiband_ee: c must be >= 0");
}

void validate(const SumRateConfig& cfg) {
  if (cfg.n_bands < 1) fail("sum_rate: n_bands must be >= 1");
  if (!(cfg.sigma2 > 0.0)) fail("sum_rate: sigma2 must be > 0");
  if (!(cfg.p_total > 0.0)) fail("sum_rate: p_total must be > 0");
}

void validate(const MimoEEConfig& cfg) {
  if (cfg.n_tx < 1) fail("mimo_ee: n_tx must be >= 1");
  if (cfg.n_rx < 1) fail("mimo_ee: n_rx must be >= 1");
  if (!(cfg.r0 > 0.0)) fail("mimo_ee: r0 must be > 0");
  if (!(cfg.sigma2 > 0.0)) fail("mimo_ee: sigma2 must be > 0");
  if (!(cfg.p0 > 0.0)) fail("mimo_ee: p0 must be > 0");
  if (!(cfg.p_max > 0.0)) fail("mimo_ee: p_max must be > 0");
}

void validate(const NegSquaredDistanceConfig& cfg) {
  if (cfg.dim < 1) fail("neg_squared_distance: dim must be >= 1");
}

// ---------------------------------------------------------------------------
// Decisions
// ---------------------------------------------------------------------------

int egt_active_count(const EgtDecision& d) {
  int l = 0;
  for (auto b : d.mask) l += (b != 0);
  return l;
}

std::vector<double> decision_embedding(const Decision& d) {
  if (const auto* p = std::get_if<PowerVector>(&d)) {
    return p->powers;
  }
  const auto& e = std::get<EgtDecision>(d);
  const int l = egt_active_count(e);
  if (l == 0) fail("egt decision: mask must have at least one active antenna");
  std::vector<double> diag(e.mask.size(), 0.0);
  const double per_antenna = e.scale / static_cast<double>(l);
  for (std::size_t i = 0; i < e.mask.size(); ++i) {
    if (e.mask[i]) diag[i] = per_antenna;
  }
  return diag;
}

std::vector<double> project_to_simplex(const std::vector<double>& x, double total) {
  if (x.empty()) fail("project_to_simplex: empty vector");
  if (!(total > 0.0)) fail("project_to_simplex: total must be > 0");
  std::vector<double> u = x;
  std::sort(u.begin(), u.end(), std::greater<double>());
  double prefix = 0.0;
  double tau = 0.0;
  std::size_t active = 0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    prefix += u[k];
    const double candidate = (prefix - total) / static_cast<double>(k + 1);
    if (u[k] - candidate > 0.0) {
      tau = candidate;
      active = k + 1;
    }
  }
  (void)active;
  std::vector<double> p(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) p[i] = std::max(0.0, x[i] - tau);
  return p;
}

double decision_displacement2(const Decision& a, const Decision& b) {
  const std::vector<double> ea = decision_embedding(a);
  const std::vector<double> eb = decision_embedding(b);
  if (ea.size() != eb.size()) fail("decision displacement: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < ea.size(); ++i) {
    const double diff = ea[i] - eb[i];
    s += diff * diff;
  }
  return s;
}

void validate_decision_set(const DecisionSet& d) {
  if (d.decisions.empty()) fail("decision set must be nonempty");
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = i + 1; j < d.size(); ++j) {
      if (d.decisions[i] == d.decisions[j]) {
        fail("decision set: decisions " + std::to_string(i + 1) + " and " +
             std::to_string(j + 1) + " are identical");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Sampling & feature encoding
// ---------------------------------------------------------------------------

std::vector<double> encode_features(const Parameter& g) {
  if (const auto* gains = std::get_if<std::vector<double>>(&g)) {
    return *gains;
  }
  const auto& h = std::get<CMatrix>(g);
  std::vector<double> f;
  f.reserve(2 * h.data.size());
  for (const auto& z : h.data) {  // row-major, (Re, Im) interleaved
    f.push_back(z.real());
    f.push_back(z.imag());
  }
  return f;
}

Parameter decode_features(const std::vector<double>& f, const Parameter& shape_like) {
  if (std::holds_alternative<std::vector<double>>(shape_like)) {
    return f;
  }
  const auto& shape = std::get<CMatrix>(shape_like);
  if (f.size() != 2 * shape.data.size()) {
    fail("decode_features: feature length does not match the matrix shape");
  }
  CMatrix h(shape.rows, shape.cols);
  for (std::size_t k = 0; k < h.data.size(); ++k) {
    h.data[k] = {f[2 * k], f[2 * k + 1]};
  }
  return h;
}

SampleSet sample_params(const ParameterSampler& sampler, std::size_t n) {
  if (n < 1) fail("sample_params: n must be >= 1");
  SampleSet out;
  out.seed = sampler.seed;
  out.params.reserve(n);
  out.features.reserve(n);
  Rng rng(sampler.seed);

  if (const auto* eg = std::get_if<ExponentialGains>(&sampler.kind)) {
    if (eg->n_bands < 1) fail("sample_params: n_bands must be >= 1");
    for (std::size_t t = 0; t < n; ++t) {
      std::vector<double> g(static_cast<std::size_t>(eg->n_bands));
      for (auto& gi : g) gi = rng.exponential();
      out.params.emplace_back(std::move(g));
    }
  } else {
    const auto& cg = std::get<ComplexGaussianMatrix>(sampler.kind);
    if (cg.n_rx < 1 || cg.n_tx < 1) fail("sample_params: matrix dims must be >= 1");
    for (std::size_t t = 0; t < n; ++t) {
      CMatrix h(static_cast<std::size_t>(cg.n_rx), static_cast<std::size_t>(cg.n_tx));
      for (auto& z : h.data) z = rng.complex_normal_unit();
      out.params.emplace_back(std::move(h));
    }
  }
  for (const auto& p : out.params) out.features.push_back(encode_features(p));
  return out;
}

SampleSet subset(const SampleSet& samples, const std::vector<std::size_t>& idx) {
  SampleSet out;
  out.seed = samples.seed;
  out.params.reserve(idx.size());
  out.features.reserve(idx.size());
  for (std::size_t i : idx) {
    out.params.push_back(samples.params.at(i));
    out.features.push_back(samples.features.at(i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Utility evaluation
// ---------------------------------------------------------------------------

double eval_multiband_ee(const PowerVector& p, const std::vector<double>& g,
                         const MultiBandEEConfig& cfg) {
  const std::size_t n = static_cast<std::size_t>(cfg.n_bands);
  if (p.powers.size() != n || g.size() != n) {
    fail("multiband_ee: power/gain length must equal n_bands");
  }
  const double a = cfg.c * cfg.sigma2;
  double success = 0.0;
  double total_power = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(g[i] > 0.0)) fail("multiband_ee: gains must be > 0");
    if (p.powers[i] < 0.0) fail("multiband_ee: powers must be >= 0");
    if (p.powers[i] > 0.0) {
      success += std::exp(-a / (p.powers[i] * g[i]));
      total_power += p.powers[i];
    }
    // p_i = 0: w -> 0 as the SNR vanishes, the band contributes nothing
  }
  if (!(total_power > 0.0)) fail("multiband_ee: all-zero power vector");
  return success / total_power;
}

double eval_sum_rate(const PowerVector& p, const std::vector<double>& g,
                     const SumRateConfig& cfg) {
  const std::size_t n = static_cast<std::size_t>(cfg.n_bands);
  if (p.powers.size() != n || g.size() != n) {
    fail("sum_rate: power/gain length must equal n_bands");
  }
  double rate = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(g[i] > 0.0)) fail("sum_rate: gains must be > 0");
    if (p.powers[i] < 0.0) fail("sum_rate: powers must be >= 0");
    rate += std::log1p(p.powers[i] * g[i] / cfg.sigma2);
  }
  return rate;
}

double eval_mimo_ee(const EgtDecision& d, const CMatrix& h, const MimoEEConfig& cfg) {
  const std::size_t nt = static_cast<std::size_t>(cfg.n_tx);
  const std::size_t nr = static_cast<std::size_t>(cfg.n_rx);
  if (h.rows != nr || h.cols != nt) fail("mimo_ee: channel matrix must be n_rx x n_tx");
  if (d.mask.size() != nt) fail("mimo_ee: mask length must equal n_tx");
  const int l = egt_active_count(d);
  if (l == 0) fail("mimo_ee: mask must select at least one antenna");
  if (!(d.scale > 0.0)) fail("mimo_ee: scale must be > 0");
  if (d.scale > cfg.p_max * (1.0 + 1e-12)) {
    fail("mimo_ee: trace " + std::to_string(d.scale) + " exceeds p_max " +
         std::to_string(cfg.p_max));
  }

  // A = rho * H Q H^H with Q = (scale/l) Diag(mask); Hermitian by construction.
  const double q = d.scale / static_cast<double>(l);
  const double rho = 1.0 / cfg.sigma2;
  CMatrix a(nr, nr);
  for (std::size_t i = 0; i < nr; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      std::complex<double> s = 0.0;
      for (std::size_t k = 0; k < nt; ++k) {
        if (d.mask[k]) s += h(i, k) * std::conj(h(j, k));
      }
      s *= rho * q;
      a(i, j) = s;
      a(j, i) = std::conj(s);
    }
  }
  const double log2_det = log2_det_identity_plus(std::move(a));
  return cfg.r0 * log2_det / (d.scale + cfg.p0);
}

double UtilityModel::evaluate(const Decision& d, const Parameter& g) const {
  return std::visit(
      [&](const auto& cfg) -> double {
        using Cfg = std::decay_t<decltype(cfg)>;
        if constexpr (std::is_same_v<Cfg, MultiBandEEConfig>) {
          const auto* p = std::get_if<PowerVector>(&d);
          const auto* gains = std::get_if<std::vector<double>>(&g);
          if (!p || !gains) fail("multiband_ee: expects a power vector and a gain vector");
          return eval_multiband_ee(*p, *gains, cfg);
        } else if constexpr (std::is_same_v<Cfg, SumRateConfig>) {
          const auto* p = std::get_if<PowerVector>(&d);
          const auto* gains = std::get_if<std::vector<double>>(&g);
          if (!p || !gains) fail("sum_rate: expects a power vector and a gain vector");
          return eval_sum_rate(*p, *gains, cfg);
        } else if constexpr (std::is_same_v<Cfg, MimoEEConfig>) {
          const auto* e = std::get_if<EgtDecision>(&d);
          const auto* h = std::get_if<CMatrix>(&g);
          if (!e || !h) fail("mimo_ee: expects an EGT decision and a channel matrix");
          return eval_mimo_ee(*e, *h, cfg);
        } else {
          const auto* p = std::get_if<PowerVector>(&d);
          const auto* x = std::get_if<std::vector<double>>(&g);
          if (!p || !x) fail("neg_squared_distance: expects two real vectors");
          if (p->powers.size() != x->size() ||
              p->powers.size() != static_cast<std::size_t>(cfg.dim)) {
            fail("neg_squared_distance: dimension mismatch");
          }
          double s = 0.0;
          for (std::size_t i = 0; i < x->size(); ++i) {
            const double diff = p->powers[i] - (*x)[i];
            s += diff * diff;
          }
          return -s;
        }
      },
      config);
}

int UtilityModel::parameter_dim() const {
  return std::visit(
      [](const auto& cfg) -> int {
        using Cfg = std::decay_t<decltype(cfg)>;
        if constexpr (std::is_same_v<Cfg, MimoEEConfig>) {
          return 2 * cfg.n_tx * cfg.n_rx;
        } else if constexpr (std::is_same_v<Cfg, NegSquaredDistanceConfig>) {
          return cfg.dim;
        } else {
          return cfg.n_bands;
        }
      },
      config);
}

// ---------------------------------------------------------------------------
// EGT decision sets
// ---------------------------------------------------------------------------

DecisionSet build_egt_decision_set(const MimoEEConfig& cfg, double p) {
  validate(cfg);
  if (!(p > 0.0)) fail("build_egt_decision_set: p must be > 0");
  const int nt = cfg.n_tx;

  DecisionSet out;
  out.decisions.reserve((std::size_t{1} << nt) - 1);

  // Masks by active count ascending, antenna subsets lexicographic within a
  // count: for n_tx = 2 this gives (1,0), (0,1), (1,1).
  std::vector<int> subset;
  for (int l = 1; l <= nt; ++l) {
    subset.assign(static_cast<std::size_t>(l), 0);
    for (int i = 0; i < l; ++i) subset[static_cast<std::size_t>(i)] = i;
    while (true) {
      EgtDecision d;
      d.scale = p;
      d.mask.assign(static_cast<std::size_t>(nt), 0);
      for (int i : subset) d.mask[static_cast<std::size_t>(i)] = 1;
      out.decisions.emplace_back(std::move(d));

      // next combination
      int pos = l - 1;
      while (pos >= 0 && subset[static_cast<std::size_t>(pos)] == nt - l + pos) --pos;
      if (pos < 0) break;
      ++subset[static_cast<std::size_t>(pos)];
      for (int i = pos + 1; i < l; ++i) {
        subset[static_cast<std::size_t>(i)] = subset[static_cast<std::size_t>(i - 1)] + 1;
      }
    }
  }
  return out;
}

std::vector<DecisionSet> grow_nested_decision_sets(const DecisionSet& full,
                                                   std::size_t k_max, std::uint64_t seed) {
  if (full.decisions.empty()) fail("grow_nested_decision_sets: full set is empty");
  if (k_max < 1 || k_max > full.size()) {
    fail("grow_nested_decision_sets: k_max must be in [1, |full|]");
  }
  Rng rng(seed);
  std::vector<std::size_t> remaining(full.size());
  for (std::size_t i = 0; i < remaining.size(); ++i) remaining[i] = i;

  std::vector<std::size_t> chain;
  chain.reserve(k_max);
  for (std::size_t k = 0; k < k_max; ++k) {
    const std::size_t pick = static_cast<std::size_t>(rng.below(remaining.size()));
    chain.push_back(remaining[pick]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
  }

  std::vector<DecisionSet> nested;
  nested.reserve(k_max);
  for (std::size_t k = 1; k <= k_max; ++k) {
    DecisionSet dk;
    dk.decisions.reserve(k);
    for (std::size_t i = 0; i < k; ++i) dk.decisions.push_back(full.decisions[chain[i]]);
    nested.push_back(std::move(dk));
  }
  return nested;
}

double find_pstar(const MimoEEConfig& cfg, const std::vector<double>& p_grid,
                  const SampleSet& samples) {
  if (p_grid.empty()) fail("find_pstar: empty candidate grid");
  if (samples.size() == 0) fail("find_pstar: empty sample set");
  for (double p : p_grid) {
    if (!(p > 0.0)) fail("find_pstar: grid entries must be > 0");
  }

  double best_p = 0.0;
  double best_value = -1.0;
  bool first = true;
  for (double p : p_grid) {
    MimoEEConfig candidate = cfg;
    candidate.p_max = p;
    const DecisionSet dset = build_egt_decision_set(candidate, p);

    KahanSum mean;
    for (const auto& param : samples.params) {
      const auto& h = std::get<CMatrix>(param);
      double best_u = -1.0;
      for (const auto& d : dset.decisions) {
        const double u = eval_mimo_ee(std::get<EgtDecision>(d), h, candidate);
        if (u > best_u) best_u = u;
      }
      mean.add(best_u);
    }
    const double value = mean.value() / static_cast<double>(samples.size());
    if (first || value > best_value) {  // strict >: ties stay at the smaller P
      best_value = value;
      best_p = p;
      first = false;
    }
  }
  return best_p;
}

std::vector<double> default_pstar_grid(const MimoEEConfig& cfg) {
  std::vector<double> grid;
  const int n = std::max(1, static_cast<int>(std::floor(2.0 * cfg.p0)));
  grid.reserve(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) grid.push_back(static_cast<double>(i));
  return grid;
}

}  // namespace doq
