#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "doq/model.hpp"
#include "doq/quantizer.hpp"

namespace doq {

// ---------------------------------------------------------------------------
// Alternating quantizer design (cell update / representative update)
// ---------------------------------------------------------------------------

/// Representative updates pick the best decision from a fixed candidate set.
struct DiscreteCandidates {
  DecisionSet candidates;
};

/// Representative updates run a derivative-free local maximizer over power
/// vectors inside the box, started from the incumbent decision and accepted
/// only if the cell objective does not decrease.
struct ContinuousSearch {
  Box bounds;
  double tolerance = 1e-8;
  int max_evals = 500;  // objective evaluations per cell per iteration
};

using RepresentativeMode = std::variant<DiscreteCandidates, ContinuousSearch>;

struct AlternatingConfig {
  std::size_t m = 1;        // decision count M
  double epsilon = 1e-10;   // squared-displacement convergence tolerance
  int t_max = 100;          // iteration cap
  RepresentativeMode mode;
  std::uint64_t seed = 0;
  bool record_label_trace = false;  // keep per-iteration labels in the report
};

struct AlternatingReport {
  DecisionSet final_decisions;
  std::vector<int> labels;                  // consistent with final_decisions
  std::vector<double> utility_history;      // empirical mean after each iteration
  std::vector<std::vector<int>> label_trace;  // filled when requested
  int iterations = 0;
  bool converged = false;
};

/// Per-sample argmax_k u(d_k; g_t); ties to the lowest index. These are the
/// label_samples labels without the split assignment.
std::vector<int> update_cells(const UtilityModel& model, const DecisionSet& d,
                              const SampleSet& samples);

/// For each cell, the decision maximizing the empirical mean utility over the
/// cell members. Empty cells keep their incumbent decision unchanged.
DecisionSet update_representatives(const UtilityModel& model, const SampleSet& samples,
                                   const std::vector<int>& labels,
                                   const DecisionSet& incumbent,
                                   const RepresentativeMode& mode);

/// Seeded initial decision set: for DiscreteCandidates, a draw of M distinct
/// per-sample-best candidates (padded from the remaining candidates when
/// fewer than M are ever optimal); for ContinuousSearch, per-sample continuous
/// optima of M randomly drawn samples.
DecisionSet make_initial_decisions(const UtilityModel& model, const SampleSet& samples,
                                   const AlternatingConfig& cfg);

/// Alternates update_cells / update_representatives until the summed squared
/// decision displacement falls to cfg.epsilon or t_max iterations pass.
/// The report's labels are recomputed from the final decisions, so they are
/// always cell-consistent at termination. utility_history is nondecreasing
/// up to accumulation noise (both half-steps maximize the same empirical
/// objective over a fixed sample set).
AlternatingReport doq_alternate(const UtilityModel& model, const SampleSet& samples,
                                const AlternatingConfig& cfg, const DecisionSet& init);

// ---------------------------------------------------------------------------
// Bounded derivative-free maximization
// ---------------------------------------------------------------------------

struct BoxMaximizeResult {
  std::vector<double> x;
  double value = 0.0;
  int evals = 0;
};

/// Nelder-Mead reflections clamped to the box, followed by a
/// finite-difference quadratic polish (Newton step on the fitted surface)
/// that is kept only when it does not lower the objective. The polish is what
/// lets the maximizer land on quadratic optima to near machine precision
/// instead of the ~sqrt(eps) plateau of comparison-based search.
/// Points where f throws a domain error count as -infinity.
BoxMaximizeResult maximize_in_box(const std::function<double(const std::vector<double>&)>& f,
                                  const std::vector<double>& start, const Box& box,
                                  double tolerance, int max_evals);

// ---------------------------------------------------------------------------
// k-means baseline
// ---------------------------------------------------------------------------

struct KmeansTrace {
  std::vector<std::vector<int>> labels;  // per iteration
  std::vector<double> wcss;              // within-cluster sum of squares
};

/// Seeded uniform draw of k pairwise-distinct feature vectors (first k of a
/// partial Fisher-Yates over the distinct values, in first-occurrence order).
std::vector<std::vector<double>> kmeans_seed_representatives(
    const std::vector<std::vector<double>>& features, std::size_t k, std::uint64_t seed);

/// Lloyd iterations: assign to the nearest representative (ties to the lowest
/// index), recompute representatives as cell means; an empty cluster is
/// re-seeded to the point farthest from its old representative. Stops at
/// `iters` or at an exact assignment fixpoint. The returned quantizer has no
/// cell decisions yet; see assign_cell_decisions.
CellQuantizer kmeans_fit(const std::vector<std::vector<double>>& features, std::size_t k,
                         int iters, std::uint64_t seed, KmeansTrace* trace = nullptr);

enum class CellDecisionRule {
  CellMeanUtility,   // argmax of the mean utility over the cell members
  AtRepresentative,  // argmax of the utility at the decoded representative
};

struct CellAssignment {
  CellQuantizer quantizer;
  std::vector<int> empty_cells;  // cells that fell back to representative-point decisions
};

/// Attaches a decision index from d to every cell. Under CellMeanUtility an
/// empty cell falls back to the representative-point rule and is flagged.
CellAssignment assign_cell_decisions(const CellQuantizer& q, const UtilityModel& model,
                                     const DecisionSet& d, const SampleSet& samples,
                                     CellDecisionRule rule = CellDecisionRule::CellMeanUtility);

/// Empirical mean of u(d_{label_t}; g_t), compensated summation.
double mean_labeled_utility(const UtilityModel& model, const DecisionSet& d,
                            const std::vector<int>& labels, const SampleSet& samples);

}  // namespace doq
