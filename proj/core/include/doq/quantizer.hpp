#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "doq/model.hpp"

namespace doq {

// ---------------------------------------------------------------------------
// Decisional quantizers: maps g -> decision index, in four interchangeable
// forms. All variants are immutable after construction and safe for
// concurrent quantize() calls.
// ---------------------------------------------------------------------------

/// Picks argmax_k u(d_k; g) directly; ties go to the lowest index.
struct ExhaustiveArgmaxQuantizer {
  UtilityModel model;
  DecisionSet decisions;
};

/// Scalar-gain quantizer: thresholds strictly decreasing, decision_order a
/// permutation of the decision indices. Gains above thresholds[0] map to
/// decision_order[0]; between thresholds[i-1] and thresholds[i] to
/// decision_order[i]; below the last threshold to decision_order.back().
/// A gain exactly equal to a threshold joins the lower-gain side.
struct Threshold1DQuantizer {
  std::vector<double> thresholds;
  std::vector<int> decision_order;
};

/// Nearest-representative cells in feature space; cell_decisions[j] is the
/// decision index attached to cell j. cell_decisions may be empty for a
/// freshly fitted quantizer (see kmeans_fit), in which case quantize()
/// throws std::logic_error.
struct CellQuantizer {
  std::vector<std::vector<double>> representatives;
  std::vector<int> cell_decisions;
};

/// Classifier-backed quantizer: score(features) returns one score per
/// decision; quantize() takes the argmax, ties to the lowest index.
struct NnQuantizer {
  std::function<std::vector<double>(const std::vector<double>&)> score;
  int n_classes = 0;
};

using DecisionalQuantizer = std::variant<ExhaustiveArgmaxQuantizer, Threshold1DQuantizer,
                                         CellQuantizer, NnQuantizer>;

/// 0-based decision index for any valid parameter realization.
int quantize(const DecisionalQuantizer& q, const Parameter& g);

/// argmax_k u(d_k; g), ties to the lowest index.
int argmax_decision(const UtilityModel& model, const DecisionSet& d, const Parameter& g);

double squared_distance(const std::vector<double>& a, const std::vector<double>& b);
int nearest_representative(const std::vector<std::vector<double>>& reps,
                           const std::vector<double>& feature);

// ---------------------------------------------------------------------------
// Exhaustive labeling
// ---------------------------------------------------------------------------

/// Features with optimal-decision labels and a train/validation/test index
/// partition (disjoint and exhaustive).
struct LabeledDataset {
  std::vector<std::vector<double>> features;
  std::vector<int> labels;  // 0-based decision indices
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  std::vector<std::size_t> test_idx;
};

/// Labels every sample with argmax_k u(d_k; g_t) (ties to the lowest index)
/// and assigns the split by a seeded shuffle; default proportions are
/// 0.70/0.15/0.15. Utility evaluation errors are rethrown with the sample
/// index attached.
LabeledDataset label_samples(const UtilityModel& model, const DecisionSet& d,
                             const SampleSet& samples, std::uint64_t split_seed,
                             double train_frac = 0.70, double val_frac = 0.15);

// ---------------------------------------------------------------------------
// Analytic single-band EE thresholds
// ---------------------------------------------------------------------------

/// For ascending powers P_1 < ... < P_M and the single-band EE utility
/// u(P; g) = exp(-c*sigma2/(P*g)) / P, the boundary between consecutive
/// decisions is
///   t_i = c*sigma2 * (1/P_i - 1/P_{i+1}) / (ln P_{i+1} - ln P_i),
/// and only consecutive-pair boundaries are effective. The t_i come out
/// strictly decreasing, which this function also verifies. The returned
/// quantizer maps g > t_1 to P_1, t_i > g > t_{i+1} to P_{i+1}, and
/// g < t_{M-1} to P_M.
Threshold1DQuantizer scalar_effective_thresholds(const std::vector<double>& powers,
                                                 double c, double sigma2);

// ---------------------------------------------------------------------------
// Decision-region rasterization (1-D and 2-D parameter spaces)
// ---------------------------------------------------------------------------

struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  std::size_t dim() const { return lo.size(); }
};

struct RegionGrid {
  std::size_t dim = 0;
  std::size_t resolution = 0;      // points per axis
  std::vector<int> decision_indices;  // row-major, first axis outermost
};

/// Axis points lo + (hi - lo) * (i + 1) / resolution for i = 0..resolution-1:
/// a uniform grid over the box that ends exactly at hi and stays clear of lo,
/// so gain boxes anchored at 0 never produce a zero gain. resolution = 1
/// evaluates the box corner hi alone.
std::vector<double> grid_axis(double lo, double hi, std::size_t resolution);

RegionGrid as_region_grid(const DecisionalQuantizer& q, const Box& bounds,
                          std::size_t resolution);

}  // namespace doq
