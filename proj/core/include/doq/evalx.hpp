#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "doq/model.hpp"
#include "doq/quantizer.hpp"

namespace doq {

// ---------------------------------------------------------------------------
// Utility oracles: the best achievable utility at a given parameter, under a
// declared feasible set. Every report names its oracle.
// ---------------------------------------------------------------------------

struct MaxOverDecisionSet {
  DecisionSet decisions;
};

/// Closed-form optimum of the sum rate over the simplex sum p_i = p_total.
struct WaterFillingOracle {};

/// Multi-band EE only: joint maximization over a per-band grid of
/// points_per_band log-spaced powers between p_lo and p_hi, plus the zero
/// power level per band (band off). p_lo = p_hi = 0 requests the defaults
/// c*sigma2/30 and 30*c*sigma2.
struct FineGridOracle {
  int points_per_band = 64;
  double p_lo = 0.0;
  double p_hi = 0.0;
};

using OracleSpec = std::variant<MaxOverDecisionSet, WaterFillingOracle, FineGridOracle>;

/// U(g) under the declared oracle. Oracle/model mismatches throw.
double oracle_utility(const UtilityModel& model, const Parameter& g, const OracleSpec& oracle);

/// argmax of sum_i ln(1 + p_i g_i / sigma2) subject to sum p_i = p_total,
/// p_i >= 0: p_i = max(0, mu - sigma2/g_i) with the water level found by
/// sorting, exact up to rounding.
PowerVector water_filling(const std::vector<double>& g, const SumRateConfig& cfg);

// ---------------------------------------------------------------------------
// Monte-Carlo evaluation
// ---------------------------------------------------------------------------

struct EvaluationReport {
  double expected_utility = 0.0;
  double oracle_expected_utility = 0.0;
  double relative_loss_pct = 0.0;      // mean per-sample |u* - u_q| / u*, in %
  double mean_squared_oracle_gap = 0.0;  // mean (u* - u_q)^2
  std::vector<std::size_t> per_decision_counts;
  std::size_t n_samples = 0;
  std::size_t skipped_zero_oracle = 0;  // samples with u* = 0, excluded from the loss mean
  std::uint64_t seed = 0;
};

/// (1/n) sum_t u(d_{quantize(q, g_t)}; g_t), compensated summation. Utility
/// errors are rethrown with the sample index attached.
double expected_utility(const DecisionalQuantizer& q, const UtilityModel& model,
                        const DecisionSet& d, const SampleSet& samples);

EvaluationReport evaluate_quantizer(const DecisionalQuantizer& q, const UtilityModel& model,
                                    const DecisionSet& d, const SampleSet& samples,
                                    const OracleSpec& oracle);

double relative_loss(const DecisionalQuantizer& q, const UtilityModel& model,
                     const DecisionSet& d, const SampleSet& samples,
                     const OracleSpec& oracle);

// ---------------------------------------------------------------------------
// Compression rate
// ---------------------------------------------------------------------------

struct DesignedQuantizer {
  DecisionSet decisions;
  DecisionalQuantizer quantizer;
};

/// Builds a quantizer with a given decision budget M.
using QuantizerDesigner = std::function<DesignedQuantizer(std::size_t m)>;

/// Smallest M <= m_cap whose designed quantizer achieves a relative loss of
/// at most sigma_pct; nullopt when none does.
std::optional<std::size_t> min_decisions(const UtilityModel& model, const SampleSet& samples,
                                         double sigma_pct, const QuantizerDesigner& designer,
                                         std::size_t m_cap, const OracleSpec& oracle);

struct CompressionPoint {
  double sigma_pct = 0.0;
  std::size_t m_required = 0;
  double gamma = 0.0;  // reference_m / m_required
  double loss_pct_at_m = 0.0;
  bool achieved = true;  // false when the loss target was not reached below m_cap
};

struct CompressionCurve {
  std::vector<CompressionPoint> points;
  std::size_t reference_m = 0;   // M(1%), or m_cap when flagged below
  bool reference_is_cap = false;  // M(1%) was not achieved, fell back to m_cap
};

/// gamma(sigma) = M(1%) / M(sigma) over ascending sigma targets. Designer
/// results are cached per M, so the scan designs each budget at most once.
CompressionCurve compression_curve(const UtilityModel& model, const SampleSet& samples,
                                   const std::vector<double>& sigmas,
                                   const QuantizerDesigner& designer, std::size_t m_cap,
                                   const OracleSpec& oracle);

}  // namespace doq
