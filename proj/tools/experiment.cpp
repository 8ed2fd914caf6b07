#include "experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "doq/algopt.hpp"
#include "doq/evalx.hpp"
#include "doq/learn.hpp"
#include "doq/model.hpp"
#include "doq/quantizer.hpp"
#include "doq/rng.hpp"

namespace doq::cli {

namespace {

using nlohmann::json;

// seed streams, one per randomness consumer
constexpr std::uint64_t kStreamSampler = 1;
constexpr std::uint64_t kStreamSplit = 2;
constexpr std::uint64_t kStreamNnInit = 3;
constexpr std::uint64_t kStreamChain = 4;
constexpr std::uint64_t kStreamDesign = 5;
constexpr std::uint64_t kStreamKmeans = 6;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json load_config(const std::string& path) {
  if (path.empty()) fail("config: --config <path> is required for this command");
  std::ifstream in(path);
  if (!in) fail("config: cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail("config: " + path + " is not valid JSON: " + e.what());
  }
}

const json& require_field(const json& j, const std::string& key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) fail("config: missing required field '" + where + key + "'");
  return *it;
}

template <typename T>
T require_value(const json& j, const std::string& key, const std::string& where) {
  try {
    return require_field(j, key, where).get<T>();
  } catch (const json::exception&) {
    fail("config: field '" + where + key + "' has the wrong type");
  }
}

template <typename T>
T value_or(const json& j, const std::string& key, T fallback, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    fail("config: field '" + where + key + "' has the wrong type");
  }
}

// ---------------------------------------------------------------------------
// Config assembly
// ---------------------------------------------------------------------------

struct Experiment {
  json config;  // with the effective seed folded in, used for hashing
  std::uint64_t seed = 0;
  std::size_t n_samples = 100000;
  double train_frac = 0.70;
  double val_frac = 0.15;
  UtilityModel model;
};

UtilityModel parse_utility(const json& cfg) {
  const json& u = require_field(cfg, "utility", "");
  const auto kind = require_value<std::string>(u, "kind", "utility.");
  UtilityModel model;
  if (kind == "multiband_ee") {
    MultiBandEEConfig c{require_value<int>(u, "n_bands", "utility."),
                        require_value<double>(u, "c", "utility."),
                        require_value<double>(u, "sigma2", "utility.")};
    validate(c);
    model.config = c;
  } else if (kind == "sum_rate") {
    SumRateConfig c{require_value<int>(u, "n_bands", "utility."),
                    require_value<double>(u, "sigma2", "utility."),
                    require_value<double>(u, "p_total", "utility.")};
    validate(c);
    model.config = c;
  } else if (kind == "mimo_ee") {
    MimoEEConfig c{require_value<int>(u, "n_tx", "utility."),
                   require_value<int>(u, "n_rx", "utility."),
                   require_value<double>(u, "r0", "utility."),
                   require_value<double>(u, "sigma2", "utility."),
                   require_value<double>(u, "p0", "utility."),
                   require_value<double>(u, "p_max", "utility.")};
    validate(c);
    model.config = c;
  } else {
    fail("config: unknown utility.kind '" + kind + "'");
  }
  return model;
}

Experiment parse_experiment(const CommonOptions& opt) {
  Experiment ex;
  ex.config = load_config(opt.config_path);
  ex.seed = opt.seed.value_or(value_or<std::uint64_t>(ex.config, "seed", 0, ""));
  ex.config["seed"] = ex.seed;
  const auto n = value_or<std::int64_t>(ex.config, "n_samples", 100000, "");
  if (n < 1) fail("config: n_samples must be >= 1");
  ex.n_samples = static_cast<std::size_t>(n);
  if (ex.config.contains("split")) {
    const auto split = require_value<std::vector<double>>(ex.config, "split", "");
    if (split.size() != 3) fail("config: split must have three fractions");
    for (double f : split) {
      if (f < 0.0 || f > 1.0) fail("config: split fractions must be in [0, 1]");
    }
    if (std::fabs(split[0] + split[1] + split[2] - 1.0) > 1e-9) {
      fail("config: split fractions must sum to 1");
    }
    ex.train_frac = split[0];
    ex.val_frac = split[1];
  }
  ex.model = parse_utility(ex.config);
  return ex;
}

ParameterSampler sampler_for(const Experiment& ex) {
  ParameterSampler sampler;
  sampler.seed = derive_seed(ex.seed, kStreamSampler);
  if (const auto* mimo = std::get_if<MimoEEConfig>(&ex.model.config)) {
    sampler.kind = ComplexGaussianMatrix{mimo->n_rx, mimo->n_tx};
  } else if (const auto* mb = std::get_if<MultiBandEEConfig>(&ex.model.config)) {
    sampler.kind = ExponentialGains{mb->n_bands};
  } else if (const auto* sr = std::get_if<SumRateConfig>(&ex.model.config)) {
    sampler.kind = ExponentialGains{sr->n_bands};
  } else {
    fail("config: no sampler for this utility kind");
  }
  return sampler;
}

int bands_of(const UtilityModel& model) {
  if (const auto* mb = std::get_if<MultiBandEEConfig>(&model.config)) return mb->n_bands;
  if (const auto* sr = std::get_if<SumRateConfig>(&model.config)) return sr->n_bands;
  fail("config: this command needs a banded (vector-decision) utility");
}

DecisionSet parse_decisions(const Experiment& ex) {
  const json& d = require_field(ex.config, "decisions", "");
  const auto kind = require_value<std::string>(d, "kind", "decisions.");
  DecisionSet out;
  if (kind == "power_product") {
    const auto levels = require_value<std::vector<double>>(d, "levels", "decisions.");
    if (levels.empty()) fail("config: decisions.levels must be nonempty");
    const int n = bands_of(ex.model);
    std::vector<std::size_t> digit(static_cast<std::size_t>(n), 0);
    while (true) {
      PowerVector p;
      for (std::size_t i = 0; i < digit.size(); ++i) p.powers.push_back(levels[digit[i]]);
      out.decisions.push_back(std::move(p));
      std::size_t pos = digit.size();
      while (pos-- > 0) {
        if (++digit[pos] < levels.size()) break;
        digit[pos] = 0;
        if (pos == 0) {
          validate_decision_set(out);
          return out;
        }
      }
    }
  }
  if (kind == "explicit") {
    const auto vectors =
        require_value<std::vector<std::vector<double>>>(d, "vectors", "decisions.");
    const int n = bands_of(ex.model);
    for (const auto& v : vectors) {
      if (v.size() != static_cast<std::size_t>(n)) {
        fail("config: decisions.vectors entries must have n_bands powers");
      }
      out.decisions.push_back(PowerVector{v});
    }
    validate_decision_set(out);
    return out;
  }
  if (kind == "egt" || kind == "egt_nested") {
    const auto* mimo = std::get_if<MimoEEConfig>(&ex.model.config);
    if (!mimo) fail("config: EGT decisions require the mimo_ee utility");
    DecisionSet full = build_egt_decision_set(*mimo, mimo->p_max);
    if (kind == "egt") return full;
    const auto k = require_value<std::int64_t>(d, "k", "decisions.");
    if (k < 1 || static_cast<std::size_t>(k) > full.size()) {
      fail("config: decisions.k must be in [1, 2^n_tx - 1]");
    }
    auto chain = grow_nested_decision_sets(full, static_cast<std::size_t>(k),
                                           derive_seed(ex.seed, kStreamChain));
    return chain.back();
  }
  fail("config: unknown decisions.kind '" + kind + "'");
}

OracleSpec parse_oracle(const Experiment& ex, const DecisionSet& decisions) {
  if (!ex.config.contains("oracle")) {
    // defaults declared per utility family
    if (std::holds_alternative<SumRateConfig>(ex.model.config)) return WaterFillingOracle{};
    if (std::holds_alternative<MultiBandEEConfig>(ex.model.config)) return FineGridOracle{};
    const auto& mimo = std::get<MimoEEConfig>(ex.model.config);
    return MaxOverDecisionSet{build_egt_decision_set(mimo, mimo.p_max)};
  }
  const json& o = ex.config["oracle"];
  const auto kind = require_value<std::string>(o, "kind", "oracle.");
  if (kind == "max_over_decisions") return MaxOverDecisionSet{decisions};
  if (kind == "max_over_full_egt") {
    const auto* mimo = std::get_if<MimoEEConfig>(&ex.model.config);
    if (!mimo) fail("config: oracle.max_over_full_egt requires the mimo_ee utility");
    return MaxOverDecisionSet{build_egt_decision_set(*mimo, mimo->p_max)};
  }
  if (kind == "water_filling") return WaterFillingOracle{};
  if (kind == "fine_grid") {
    FineGridOracle fine;
    fine.points_per_band = value_or<int>(o, "points_per_band", 64, "oracle.");
    fine.p_lo = value_or<double>(o, "p_lo", 0.0, "oracle.");
    fine.p_hi = value_or<double>(o, "p_hi", 0.0, "oracle.");
    if (fine.points_per_band < 1) fail("config: oracle.points_per_band must be >= 1");
    return fine;
  }
  fail("config: unknown oracle.kind '" + kind + "'");
}

struct NnSettings {
  std::vector<int> hidden{20, 20, 20};
  TrainConfig train;
};

NnSettings parse_nn(const Experiment& ex) {
  NnSettings nn;
  nn.train.seed = derive_seed(ex.seed, kStreamNnInit + 10);
  if (!ex.config.contains("nn")) return nn;
  const json& n = ex.config["nn"];
  nn.hidden = value_or<std::vector<int>>(n, "hidden", nn.hidden, "nn.");
  if (nn.hidden.empty()) fail("config: nn.hidden must list at least one layer");
  for (int h : nn.hidden) {
    if (h < 1) fail("config: nn.hidden sizes must be >= 1");
  }
  nn.train.max_epochs = value_or<int>(n, "max_epochs", nn.train.max_epochs, "nn.");
  nn.train.learning_rate = value_or<double>(n, "learning_rate", nn.train.learning_rate, "nn.");
  nn.train.patience = value_or<int>(n, "patience", nn.train.patience, "nn.");
  nn.train.standardize = value_or<bool>(n, "standardize", nn.train.standardize, "nn.");
  if (nn.train.max_epochs < 1) fail("config: nn.max_epochs must be >= 1");
  if (!(nn.train.learning_rate > 0.0)) fail("config: nn.learning_rate must be > 0");
  if (nn.train.patience < 0 || nn.train.patience > nn.train.max_epochs) {
    fail("config: nn.patience must be in [0, max_epochs]");
  }
  return nn;
}

struct DesignerSettings {
  Box box;
  double epsilon = 1e-10;
  int t_max = 100;
  double nm_tolerance = 1e-8;
  int nm_max_evals = 500;
};

DesignerSettings parse_designer(const Experiment& ex, const json& block,
                                const std::string& where) {
  DesignerSettings ds;
  const int n = bands_of(ex.model);
  // default search box per family: the simplex hull for sum rate, a generous
  // multiple of c*sigma2 for the EE stationary powers
  double hi = 1.0;
  if (const auto* sr = std::get_if<SumRateConfig>(&ex.model.config)) {
    hi = sr->p_total;
  } else if (const auto* mb = std::get_if<MultiBandEEConfig>(&ex.model.config)) {
    hi = mb->c * mb->sigma2 > 0.0 ? 30.0 * mb->c * mb->sigma2 : 30.0 * mb->sigma2;
  }
  ds.box.lo.assign(static_cast<std::size_t>(n), 0.0);
  ds.box.hi.assign(static_cast<std::size_t>(n), hi);

  if (block.contains("box")) {
    const auto box = require_value<std::vector<std::vector<double>>>(block, "box", where);
    if (box.size() != static_cast<std::size_t>(n)) {
      fail("config: " + where + "box needs one [lo, hi] pair per band");
    }
    for (std::size_t i = 0; i < box.size(); ++i) {
      if (box[i].size() != 2 || !(box[i][1] > box[i][0])) {
        fail("config: " + where + "box entries must be [lo, hi] with hi > lo");
      }
      ds.box.lo[i] = box[i][0];
      ds.box.hi[i] = box[i][1];
    }
  }
  ds.epsilon = value_or<double>(block, "epsilon", ds.epsilon, where);
  ds.t_max = value_or<int>(block, "t_max", ds.t_max, where);
  ds.nm_tolerance = value_or<double>(block, "nm_tolerance", ds.nm_tolerance, where);
  ds.nm_max_evals = value_or<int>(block, "nm_max_evals", ds.nm_max_evals, where);
  if (!(ds.epsilon >= 0.0)) fail("config: " + where + "epsilon must be >= 0");
  if (ds.t_max < 1) fail("config: " + where + "t_max must be >= 1");
  if (ds.nm_max_evals < 1) fail("config: " + where + "nm_max_evals must be >= 1");
  return ds;
}

// ---------------------------------------------------------------------------
// Output plumbing
// ---------------------------------------------------------------------------

std::string comment_line(const Experiment& ex) {
  return "# config_hash=" + hex64(fnv1a(ex.config.dump())) + " seed=" + std::to_string(ex.seed) +
         " n_samples=" + std::to_string(ex.n_samples);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file '" + path + "'");
  out << content;
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

std::string csv_join(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) line += ',';
    line += cells[i];
  }
  line += '\n';
  return line;
}

}  // namespace

// ---------------------------------------------------------------------------
// thresholds
// ---------------------------------------------------------------------------

void run_thresholds(const std::vector<double>& powers, double c, double sigma2,
                    const std::string& out_path, std::uint64_t seed) {
  const Threshold1DQuantizer q = scalar_effective_thresholds(powers, c, sigma2);

  std::cout << "  i      p_low     p_high    threshold\n";
  for (std::size_t i = 0; i < q.thresholds.size(); ++i) {
    std::printf("%3zu %10g %10g    %s\n", i + 1, powers[i], powers[i + 1],
                fmt17(q.thresholds[i]).c_str());
  }

  if (!out_path.empty()) {
    json cfg;
    cfg["powers"] = powers;
    cfg["c"] = c;
    cfg["sigma2"] = sigma2;
    cfg["seed"] = seed;
    std::string csv = "# config_hash=" + hex64(fnv1a(cfg.dump())) +
                      " seed=" + std::to_string(seed) + " n_samples=0\n";
    csv += "i,p_low,p_high,threshold\n";
    for (std::size_t i = 0; i < q.thresholds.size(); ++i) {
      csv += csv_join({std::to_string(i + 1), fmt17(powers[i]), fmt17(powers[i + 1]),
                       fmt17(q.thresholds[i])});
    }
    write_file(out_path, csv);
  }
}

// ---------------------------------------------------------------------------
// regions
// ---------------------------------------------------------------------------

void run_regions(const CommonOptions& opt) {
  const Experiment ex = parse_experiment(opt);
  const auto* mb = std::get_if<MultiBandEEConfig>(&ex.model.config);
  if (!mb || mb->n_bands != 2) {
    fail("regions: only the 2-band multiband_ee utility is supported");
  }
  const DecisionSet decisions = parse_decisions(ex);
  const json& r = require_field(ex.config, "regions", "");
  const auto bounds = require_value<std::vector<std::vector<double>>>(r, "bounds", "regions.");
  const auto resolution = require_value<std::int64_t>(r, "resolution", "regions.");
  if (bounds.size() != 2 || bounds[0].size() != 2 || bounds[1].size() != 2) {
    fail("config: regions.bounds must be [[lo1, hi1], [lo2, hi2]]");
  }
  if (resolution < 1) fail("config: regions.resolution must be >= 1");

  const Box box{{bounds[0][0], bounds[1][0]}, {bounds[0][1], bounds[1][1]}};
  const DecisionalQuantizer q{ExhaustiveArgmaxQuantizer{ex.model, decisions}};
  const RegionGrid grid = as_region_grid(q, box, static_cast<std::size_t>(resolution));

  const auto axis1 = grid_axis(box.lo[0], box.hi[0], grid.resolution);
  const auto axis2 = grid_axis(box.lo[1], box.hi[1], grid.resolution);

  std::string csv = comment_line(ex) + "\n";
  csv += "g1,g2,decision_index,p1,p2\n";
  for (std::size_t i = 0; i < grid.resolution; ++i) {
    for (std::size_t j = 0; j < grid.resolution; ++j) {
      const int idx = grid.decision_indices[i * grid.resolution + j];
      const auto& p = std::get<PowerVector>(decisions[static_cast<std::size_t>(idx)]).powers;
      csv += csv_join({fmt17(axis1[i]), fmt17(axis2[j]), std::to_string(idx + 1), fmt17(p[0]),
                       fmt17(p[1])});
    }
  }
  if (opt.out_path.empty()) fail("regions: --out <csv> is required");
  write_file(opt.out_path, csv);
  std::cout << "regions: wrote " << grid.resolution * grid.resolution << " grid points to "
            << opt.out_path << "\n";
}

// ---------------------------------------------------------------------------
// compression
// ---------------------------------------------------------------------------

void run_compression(const CommonOptions& opt) {
  const Experiment ex = parse_experiment(opt);
  if (!std::holds_alternative<MultiBandEEConfig>(ex.model.config) &&
      !std::holds_alternative<SumRateConfig>(ex.model.config)) {
    fail("compression: utility must be multiband_ee or sum_rate");
  }
  const json& c = require_field(ex.config, "compression", "");
  const auto sigmas = require_value<std::vector<double>>(c, "sigmas", "compression.");
  const auto m_cap = require_value<std::int64_t>(c, "m_cap", "compression.");
  if (sigmas.empty()) fail("config: compression.sigmas must be nonempty");
  for (std::size_t i = 0; i + 1 < sigmas.size(); ++i) {
    if (!(sigmas[i] < sigmas[i + 1])) fail("config: compression.sigmas must be ascending");
  }
  if (m_cap < 1) fail("config: compression.m_cap must be >= 1");
  const DesignerSettings ds =
      parse_designer(ex, c.contains("designer") ? c["designer"] : json::object(),
                     "compression.designer.");

  const SampleSet samples = sample_params(sampler_for(ex), ex.n_samples);
  DecisionSet no_decisions;  // oracle defaults don't reference a set here
  const OracleSpec oracle = parse_oracle(ex, no_decisions);

  const UtilityModel model = ex.model;
  const std::uint64_t master = ex.seed;
  const QuantizerDesigner designer = [&, ds](std::size_t m) {
    AlternatingConfig acfg;
    acfg.m = m;
    acfg.epsilon = ds.epsilon;
    acfg.t_max = ds.t_max;
    acfg.mode = ContinuousSearch{ds.box, ds.nm_tolerance, ds.nm_max_evals};
    acfg.seed = derive_seed(master, kStreamDesign * 100 + m);
    const DecisionSet init = make_initial_decisions(model, samples, acfg);
    AlternatingReport report = doq_alternate(model, samples, acfg, init);
    DesignedQuantizer out;
    out.quantizer = ExhaustiveArgmaxQuantizer{model, report.final_decisions};
    out.decisions = std::move(report.final_decisions);
    return out;
  };

  const CompressionCurve curve = compression_curve(ex.model, samples, sigmas, designer,
                                                   static_cast<std::size_t>(m_cap), oracle);

  std::string unachieved;
  for (const auto& pt : curve.points) {
    if (!pt.achieved) {
      if (!unachieved.empty()) unachieved += ';';
      unachieved += fmt17(pt.sigma_pct);
    }
  }
  std::string csv = comment_line(ex);
  csv += " reference_m=" + std::to_string(curve.reference_m) +
         " reference_is_cap=" + (curve.reference_is_cap ? std::string("1") : std::string("0"));
  if (!unachieved.empty()) csv += " unachieved_sigmas=" + unachieved;
  csv += "\nsigma_pct,m_required,gamma,loss_pct_at_m\n";
  std::cout << "sigma_pct m_required gamma loss_pct_at_m\n";
  for (const auto& pt : curve.points) {
    csv += csv_join({fmt17(pt.sigma_pct), std::to_string(pt.m_required), fmt17(pt.gamma),
                     fmt17(pt.loss_pct_at_m)});
    std::printf("%9g %10zu %5g %13g\n", pt.sigma_pct, pt.m_required, pt.gamma,
                pt.loss_pct_at_m);
  }
  if (opt.out_path.empty()) fail("compression: --out <csv> is required");
  write_file(opt.out_path, csv);
}

// ---------------------------------------------------------------------------
// mimo
// ---------------------------------------------------------------------------

void run_mimo(const CommonOptions& opt) {
  const Experiment ex = parse_experiment(opt);
  const auto* mimo = std::get_if<MimoEEConfig>(&ex.model.config);
  if (!mimo) fail("mimo: utility must be mimo_ee");
  const json& m = require_field(ex.config, "mimo", "");
  const auto k_max = require_value<std::int64_t>(m, "k_max", "mimo.");
  const auto kmeans_iters = value_or<int>(m, "kmeans_iters", 100, "mimo.");
  const DecisionSet full = build_egt_decision_set(*mimo, mimo->p_max);
  if (k_max < 1 || static_cast<std::size_t>(k_max) > full.size()) {
    fail("config: mimo.k_max must be in [1, 2^n_tx - 1]");
  }
  if (kmeans_iters < 1) fail("config: mimo.kmeans_iters must be >= 1");
  const NnSettings nn = parse_nn(ex);

  const SampleSet samples = sample_params(sampler_for(ex), ex.n_samples);
  const auto chain = grow_nested_decision_sets(full, static_cast<std::size_t>(k_max),
                                               derive_seed(ex.seed, kStreamChain));
  const std::uint64_t split_seed = derive_seed(ex.seed, kStreamSplit);

  // fixed split across every k: the shuffle depends on the seed only
  const LabeledDataset split_probe =
      label_samples(ex.model, full, samples, split_seed, ex.train_frac, ex.val_frac);
  const SampleSet train_set = subset(samples, split_probe.train_idx);
  const SampleSet test_set = subset(samples, split_probe.test_idx);
  if (test_set.size() == 0) fail("mimo: the test split is empty, adjust n_samples/split");

  const DecisionalQuantizer optimal{ExhaustiveArgmaxQuantizer{ex.model, full}};
  const double eu_optimal = expected_utility(optimal, ex.model, full, test_set);

  std::string csv = comment_line(ex) + "\n";
  csv += "k,eu_optimal,eu_doq_exhaustive,eu_nn,eu_kmeans\n";
  std::cout << " k  eu_optimal  eu_doq_exhaustive  eu_nn  eu_kmeans\n";

  for (std::size_t k = 1; k <= static_cast<std::size_t>(k_max); ++k) {
    const DecisionSet& dk = chain[k - 1];

    const DecisionalQuantizer exhaustive{ExhaustiveArgmaxQuantizer{ex.model, dk}};
    const double eu_doq = expected_utility(exhaustive, ex.model, dk, test_set);

    double eu_nn = eu_doq;  // a single decision needs no classifier
    if (k >= 2) {
      const LabeledDataset labeled =
          label_samples(ex.model, dk, samples, split_seed, ex.train_frac, ex.val_frac);
      std::vector<int> sizes;
      sizes.push_back(ex.model.parameter_dim());
      sizes.insert(sizes.end(), nn.hidden.begin(), nn.hidden.end());
      sizes.push_back(static_cast<int>(k));
      MlpClassifier net = mlp_init(sizes, derive_seed(ex.seed, kStreamNnInit * 100 + k));
      TrainConfig tcfg = nn.train;
      mlp_train(net, labeled, tcfg);
      const DecisionalQuantizer nnq{make_nn_quantizer(std::move(net))};
      eu_nn = expected_utility(nnq, ex.model, dk, test_set);
    }

    const std::size_t cells = std::min(k, train_set.size());
    const CellQuantizer fitted = kmeans_fit(train_set.features, cells, kmeans_iters,
                                            derive_seed(ex.seed, kStreamKmeans * 100 + k));
    const CellAssignment assigned = assign_cell_decisions(fitted, ex.model, dk, train_set);
    const DecisionalQuantizer kmq{assigned.quantizer};
    const double eu_kmeans = expected_utility(kmq, ex.model, dk, test_set);

    csv += csv_join({std::to_string(k), fmt17(eu_optimal), fmt17(eu_doq), fmt17(eu_nn),
                     fmt17(eu_kmeans)});
    std::printf("%2zu  %s  %s  %s  %s\n", k, fmt17(eu_optimal).c_str(), fmt17(eu_doq).c_str(),
                fmt17(eu_nn).c_str(), fmt17(eu_kmeans).c_str());
  }
  if (opt.out_path.empty()) fail("mimo: --out <csv> is required");
  write_file(opt.out_path, csv);
}

// ---------------------------------------------------------------------------
// train-nn
// ---------------------------------------------------------------------------

void run_train_nn(const CommonOptions& opt) {
  const Experiment ex = parse_experiment(opt);
  const DecisionSet decisions = parse_decisions(ex);
  if (decisions.size() < 2) fail("train-nn: need at least two decisions to classify");
  const NnSettings nn = parse_nn(ex);
  if (opt.out_path.empty()) fail("train-nn: --out <model path> is required");

  const SampleSet samples = sample_params(sampler_for(ex), ex.n_samples);
  const LabeledDataset labeled = label_samples(ex.model, decisions, samples,
                                               derive_seed(ex.seed, kStreamSplit),
                                               ex.train_frac, ex.val_frac);

  std::vector<int> sizes;
  sizes.push_back(ex.model.parameter_dim());
  sizes.insert(sizes.end(), nn.hidden.begin(), nn.hidden.end());
  sizes.push_back(static_cast<int>(decisions.size()));
  MlpClassifier net = mlp_init(sizes, derive_seed(ex.seed, kStreamNnInit));
  const TrainReport report = mlp_train(net, labeled, nn.train);

  std::ostringstream model_text;
  save_mlp(net, model_text);
  write_file(opt.out_path, model_text.str());

  std::cout << "epochs_run " << report.epochs_run << "\n";
  std::cout << "train_accuracy " << fmt17(report.train_accuracy) << "\n";
  std::cout << "val_accuracy " << fmt17(report.val_accuracy) << "\n";
  std::cout << "test_accuracy " << fmt17(report.test_accuracy) << "\n";
  std::cout << "best_val_loss " << fmt17(report.best_val_loss) << "\n";

  if (!labeled.test_idx.empty()) {
    const SampleSet test_set = subset(samples, labeled.test_idx);
    const DecisionalQuantizer nnq{make_nn_quantizer(std::move(net))};
    const DecisionalQuantizer exq{ExhaustiveArgmaxQuantizer{ex.model, decisions}};
    const double eu_nn = expected_utility(nnq, ex.model, decisions, test_set);
    const double eu_ex = expected_utility(exq, ex.model, decisions, test_set);
    std::cout << "test_eu_nn " << fmt17(eu_nn) << "\n";
    std::cout << "test_eu_exhaustive " << fmt17(eu_ex) << "\n";
  }
  std::cout << "model " << opt.out_path << "\n";
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

void run_eval(const CommonOptions& opt, const std::string& model_override) {
  const Experiment ex = parse_experiment(opt);
  const DecisionSet decisions = parse_decisions(ex);
  const OracleSpec oracle = parse_oracle(ex, decisions);
  const json& e = require_field(ex.config, "eval", "");
  const json& qspec = require_field(e, "quantizer", "eval.");
  const auto kind = require_value<std::string>(qspec, "kind", "eval.quantizer.");

  // quantizer construction is validated before any sampling happens
  int kmeans_k = 0, kmeans_iters = 100;
  std::string model_path;
  std::vector<double> threshold_powers;
  if (kind == "kmeans") {
    kmeans_k = static_cast<int>(require_value<std::int64_t>(qspec, "k", "eval.quantizer."));
    kmeans_iters = value_or<int>(qspec, "iters", 100, "eval.quantizer.");
    if (kmeans_k < 1 || kmeans_iters < 1) fail("config: eval.quantizer kmeans needs k, iters >= 1");
  } else if (kind == "nn") {
    model_path = model_override.empty()
                     ? require_value<std::string>(qspec, "model", "eval.quantizer.")
                     : model_override;
  } else if (kind == "thresholds") {
    const auto* mb = std::get_if<MultiBandEEConfig>(&ex.model.config);
    if (!mb || mb->n_bands != 1) fail("eval: threshold quantizers need 1-band multiband_ee");
    for (const auto& d : decisions.decisions) {
      threshold_powers.push_back(std::get<PowerVector>(d).powers[0]);
    }
  } else if (kind != "exhaustive") {
    fail("config: unknown eval.quantizer.kind '" + kind + "'");
  }

  const SampleSet samples = sample_params(sampler_for(ex), ex.n_samples);

  DecisionalQuantizer q{ExhaustiveArgmaxQuantizer{ex.model, decisions}};
  if (kind == "kmeans") {
    const CellQuantizer fitted =
        kmeans_fit(samples.features, static_cast<std::size_t>(kmeans_k), kmeans_iters,
                   derive_seed(ex.seed, kStreamKmeans));
    q = assign_cell_decisions(fitted, ex.model, decisions, samples).quantizer;
  } else if (kind == "nn") {
    std::ifstream in(model_path);
    if (!in) throw std::runtime_error("cannot open model file '" + model_path + "'");
    MlpClassifier net = load_mlp(in);
    if (net.n_classes() != static_cast<int>(decisions.size())) {
      fail("eval: model classes do not match the decision count");
    }
    q = make_nn_quantizer(std::move(net));
  } else if (kind == "thresholds") {
    const auto* mb = std::get_if<MultiBandEEConfig>(&ex.model.config);
    q = scalar_effective_thresholds(threshold_powers, mb->c, mb->sigma2);
  }

  const EvaluationReport report = evaluate_quantizer(q, ex.model, decisions, samples, oracle);

  std::cout << "expected_utility " << fmt17(report.expected_utility) << "\n";
  std::cout << "oracle_expected_utility " << fmt17(report.oracle_expected_utility) << "\n";
  std::cout << "relative_loss_pct " << fmt17(report.relative_loss_pct) << "\n";
  std::cout << "mean_squared_oracle_gap " << fmt17(report.mean_squared_oracle_gap) << "\n";
  std::cout << "n_samples " << report.n_samples << "\n";
  std::cout << "skipped_zero_oracle " << report.skipped_zero_oracle << "\n";
  std::cout << "per_decision_counts";
  for (std::size_t c : report.per_decision_counts) std::cout << ' ' << c;
  std::cout << "\n";

  if (!opt.out_path.empty()) {
    std::vector<std::string> header{"expected_utility", "oracle_expected_utility",
                                    "relative_loss_pct", "mean_squared_oracle_gap",
                                    "n_samples", "skipped_zero_oracle"};
    std::vector<std::string> row{fmt17(report.expected_utility),
                                 fmt17(report.oracle_expected_utility),
                                 fmt17(report.relative_loss_pct),
                                 fmt17(report.mean_squared_oracle_gap),
                                 std::to_string(report.n_samples),
                                 std::to_string(report.skipped_zero_oracle)};
    for (std::size_t i = 0; i < report.per_decision_counts.size(); ++i) {
      header.push_back("count_" + std::to_string(i + 1));
      row.push_back(std::to_string(report.per_decision_counts[i]));
    }
    std::string csv = comment_line(ex) + "\n" + csv_join(header) + csv_join(row);
    write_file(opt.out_path, csv);
  }
}

}  // namespace doq::cli
