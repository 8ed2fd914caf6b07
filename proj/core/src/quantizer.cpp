#include "doq/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "doq/rng.hpp"

namespace doq {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

}  // namespace

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) fail("squared_distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

int nearest_representative(const std::vector<std::vector<double>>& reps,
                           const std::vector<double>& feature) {
  if (reps.empty()) fail("nearest_representative: no representatives");
  int best = 0;
  double best_d = squared_distance(reps[0], feature);
  for (std::size_t j = 1; j < reps.size(); ++j) {
    const double dj = squared_distance(reps[j], feature);
    if (dj < best_d) {  // ties keep the lowest index
      best_d = dj;
      best = static_cast<int>(j);
    }
  }
  return best;
}

int argmax_decision(const UtilityModel& model, const DecisionSet& d, const Parameter& g) {
  if (d.decisions.empty()) fail("argmax_decision: empty decision set");
  int best = 0;
  double best_u = model.evaluate(d.decisions[0], g);
  for (std::size_t k = 1; k < d.size(); ++k) {
    const double u = model.evaluate(d.decisions[k], g);
    if (u > best_u) {  // ties keep the lowest index
      best_u = u;
      best = static_cast<int>(k);
    }
  }
  return best;
}

int quantize(const DecisionalQuantizer& q, const Parameter& g) {
  return std::visit(
      [&](const auto& qq) -> int {
        using Q = std::decay_t<decltype(qq)>;
        if constexpr (std::is_same_v<Q, ExhaustiveArgmaxQuantizer>) {
          return argmax_decision(qq.model, qq.decisions, g);
        } else if constexpr (std::is_same_v<Q, Threshold1DQuantizer>) {
          const auto* gains = std::get_if<std::vector<double>>(&g);
          if (!gains || gains->size() != 1) {
            fail("threshold quantizer: expects a scalar gain");
          }
          const double x = (*gains)[0];
          for (std::size_t i = 0; i < qq.thresholds.size(); ++i) {
            if (x > qq.thresholds[i]) return qq.decision_order[i];
          }
          return qq.decision_order.back();
        } else if constexpr (std::is_same_v<Q, CellQuantizer>) {
          if (qq.cell_decisions.empty()) {
            throw std::logic_error("cell quantizer: decisions are unassigned");
          }
          const int cell = nearest_representative(qq.representatives, encode_features(g));
          return qq.cell_decisions[static_cast<std::size_t>(cell)];
        } else {
          const std::vector<double> scores = qq.score(encode_features(g));
          if (scores.size() != static_cast<std::size_t>(qq.n_classes) || scores.empty()) {
            fail("nn quantizer: score vector has the wrong length");
          }
          int best = 0;
          for (std::size_t k = 1; k < scores.size(); ++k) {
            if (scores[k] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
          }
          return best;
        }
      },
      q);
}

LabeledDataset label_samples(const UtilityModel& model, const DecisionSet& d,
                             const SampleSet& samples, std::uint64_t split_seed,
                             double train_frac, double val_frac) {
  if (d.decisions.empty()) fail("label_samples: empty decision set");
  if (samples.size() == 0) fail("label_samples: empty sample set");
  if (train_frac < 0.0 || val_frac < 0.0 || train_frac + val_frac > 1.0) {
    fail("label_samples: split fractions must be nonnegative and sum to <= 1");
  }

  LabeledDataset out;
  out.features = samples.features;
  out.labels.resize(samples.size());
  for (std::size_t t = 0; t < samples.size(); ++t) {
    try {
      out.labels[t] = argmax_decision(model, d, samples.params[t]);
    } catch (const std::invalid_argument& e) {
      fail("label_samples: sample " + std::to_string(t) + ": " + e.what());
    }
  }

  // Seeded shuffle, then cut into train / validation / test.
  const std::size_t n = samples.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(split_seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(order[i - 1], order[j]);
  }
  const std::size_t n_train = static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(n)));
  const std::size_t n_val = static_cast<std::size_t>(std::floor(val_frac * static_cast<double>(n)));
  out.train_idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.val_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                     order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  out.test_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return out;
}

Threshold1DQuantizer scalar_effective_thresholds(const std::vector<double>& powers,
                                                 double c, double sigma2) {
  if (powers.size() < 2) fail("scalar_effective_thresholds: need at least two powers");
  if (!(c * sigma2 > 0.0)) fail("scalar_effective_thresholds: c*sigma2 must be > 0");
  for (std::size_t i = 0; i < powers.size(); ++i) {
    if (!(powers[i] > 0.0)) fail("scalar_effective_thresholds: powers must be > 0");
    if (i + 1 < powers.size() && !(powers[i] < powers[i + 1])) {
      fail("powers must be strictly ascending: powers[" + std::to_string(i + 1) + "]=" +
           std::to_string(powers[i + 1]) + " is not above powers[" + std::to_string(i) +
           "]=" + std::to_string(powers[i]));
    }
  }

  Threshold1DQuantizer q;
  const double a = c * sigma2;
  q.thresholds.reserve(powers.size() - 1);
  for (std::size_t i = 0; i + 1 < powers.size(); ++i) {
    const double lo = powers[i];
    const double hi = powers[i + 1];
    q.thresholds.push_back(a * (1.0 / lo - 1.0 / hi) / (std::log(hi) - std::log(lo)));
  }
  // Consecutive-pair boundaries are strictly decreasing in the power index;
  // anything else means the inputs were degenerate beyond what rounding allows.
  for (std::size_t i = 0; i + 1 < q.thresholds.size(); ++i) {
    if (!(q.thresholds[i] > q.thresholds[i + 1])) {
      throw std::runtime_error("scalar_effective_thresholds: thresholds not strictly decreasing");
    }
  }
  q.decision_order.resize(powers.size());
  for (std::size_t k = 0; k < powers.size(); ++k) q.decision_order[k] = static_cast<int>(k);
  return q;
}

std::vector<double> grid_axis(double lo, double hi, std::size_t resolution) {
  if (resolution < 1) fail("grid_axis: resolution must be >= 1");
  if (!(hi > lo)) fail("grid_axis: box must have hi > lo");
  std::vector<double> axis(resolution);
  const double span = hi - lo;
  for (std::size_t i = 0; i < resolution; ++i) {
    axis[i] = lo + span * static_cast<double>(i + 1) / static_cast<double>(resolution);
  }
  return axis;
}

RegionGrid as_region_grid(const DecisionalQuantizer& q, const Box& bounds,
                          std::size_t resolution) {
  const std::size_t dim = bounds.dim();
  if (bounds.hi.size() != dim) fail("as_region_grid: box lo/hi length mismatch");
  if (dim != 1 && dim != 2) fail("as_region_grid: only 1- and 2-D boxes are supported");

  RegionGrid grid;
  grid.dim = dim;
  grid.resolution = resolution;

  if (dim == 1) {
    const std::vector<double> axis = grid_axis(bounds.lo[0], bounds.hi[0], resolution);
    grid.decision_indices.reserve(resolution);
    for (double x : axis) {
      grid.decision_indices.push_back(quantize(q, Parameter{std::vector<double>{x}}));
    }
    return grid;
  }

  const std::vector<double> axis1 = grid_axis(bounds.lo[0], bounds.hi[0], resolution);
  const std::vector<double> axis2 = grid_axis(bounds.lo[1], bounds.hi[1], resolution);
  grid.decision_indices.reserve(resolution * resolution);
  for (double x1 : axis1) {
    for (double x2 : axis2) {
      grid.decision_indices.push_back(quantize(q, Parameter{std::vector<double>{x1, x2}}));
    }
  }
  return grid;
}

}  // namespace doq
