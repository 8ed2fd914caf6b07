#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "doq/linalg.hpp"

namespace doq {

// ---------------------------------------------------------------------------
// Utility-family configurations. All powers and noise variances are in mW.
// ---------------------------------------------------------------------------

/// Multi-band energy efficiency:
///   u(p; g) = sum_i w(p_i * g_i / sigma2) / sum_i p_i,  w(s) = exp(-c/s),
/// in 1/mW. Bands with p_i = 0 contribute 0 to the numerator (the limit of w
/// as the SNR goes to 0), which allows band-off decisions.
struct MultiBandEEConfig {
  int n_bands = 1;
  double c = 1.0;       // spectral-efficiency constant, >= 0
  double sigma2 = 1.0;  // noise variance, mW, > 0
};

/// Sum rate in nats: u(p; g) = sum_i ln(1 + p_i * g_i / sigma2).
/// Feasible decisions live on the simplex sum_i p_i = p_total; without a
/// budget the sum rate is unbounded.
struct SumRateConfig {
  int n_bands = 1;
  double sigma2 = 1.0;
  double p_total = 1.0;  // total power budget, mW, > 0
};

/// Single-user MIMO energy efficiency with idle power draw, bits/s/mW:
///   u(Q; H) = r0 * log2 det(I + H Q H^H / sigma2) / (tr(Q) + p0).
struct MimoEEConfig {
  int n_tx = 1;
  int n_rx = 1;
  double r0 = 1.0;      // raw data rate, bits/s
  double sigma2 = 1.0;  // noise variance, mW
  double p0 = 1.0;      // power consumed at zero radiated power, mW
  double p_max = 1.0;   // trace budget, mW
};

/// Quadratic proxy u(x; g) = -||x - g||^2. Running the alternating quantizer
/// design with this utility reduces it to plain k-means.
struct NegSquaredDistanceConfig {
  int dim = 1;
};

void validate(const MultiBandEEConfig& cfg);
void validate(const SumRateConfig& cfg);
void validate(const MimoEEConfig& cfg);
void validate(const NegSquaredDistanceConfig& cfg);

// ---------------------------------------------------------------------------
// Decisions
// ---------------------------------------------------------------------------

/// Per-band transmit powers (mW), entries >= 0.
struct PowerVector {
  std::vector<double> powers;

  friend bool operator==(const PowerVector& a, const PowerVector& b) {
    return a.powers == b.powers;
  }
};

/// Equal-gain transmission over a selected antenna subset. The implied
/// covariance is (scale / l) * Diag(mask) with l = popcount(mask), so the
/// trace is exactly `scale`.
struct EgtDecision {
  double scale = 0.0;              // total radiated power, mW, > 0
  std::vector<std::uint8_t> mask;  // antenna selection, at least one 1

  friend bool operator==(const EgtDecision& a, const EgtDecision& b) {
    return a.scale == b.scale && a.mask == b.mask;
  }
};

using Decision = std::variant<PowerVector, EgtDecision>;

int egt_active_count(const EgtDecision& d);

/// Euclidean projection onto {x >= 0, sum_i x_i = total}; the feasible set of
/// sum-rate decisions.
std::vector<double> project_to_simplex(const std::vector<double>& x, double total);

/// Euclidean embedding used for displacement norms: the power vector itself,
/// or the covariance diagonal (scale/l) * mask for EGT decisions.
std::vector<double> decision_embedding(const Decision& d);
double decision_displacement2(const Decision& a, const Decision& b);

/// Ordered finite decision set D = {d_1, ..., d_M}. Index order is stable;
/// indices are 0-based in code and 1-based in reports and CSV output.
struct DecisionSet {
  std::vector<Decision> decisions;

  std::size_t size() const { return decisions.size(); }
  const Decision& operator[](std::size_t i) const { return decisions[i]; }
};

/// Throws std::invalid_argument unless the set is nonempty and its decisions
/// are pairwise distinct.
void validate_decision_set(const DecisionSet& d);

// ---------------------------------------------------------------------------
// Parameters and sampling
// ---------------------------------------------------------------------------

/// A parameter realization: a vector of channel gains or a complex channel
/// matrix.
using Parameter = std::variant<std::vector<double>, CMatrix>;

struct ExponentialGains {
  int n_bands = 1;  // i.i.d. rate-1 exponential per band
};
struct ComplexGaussianMatrix {
  int n_rx = 1;  // entries i.i.d. CN(0,1)
  int n_tx = 1;
};

struct ParameterSampler {
  std::variant<ExponentialGains, ComplexGaussianMatrix> kind;
  std::uint64_t seed = 0;
};

/// Immutable after construction; safe to share across threads.
struct SampleSet {
  std::vector<Parameter> params;
  std::vector<std::vector<double>> features;  // cached encode_features output
  std::uint64_t seed = 0;

  std::size_t size() const { return params.size(); }
};

/// Deterministic given the sampler seed; features are precomputed.
SampleSet sample_params(const ParameterSampler& sampler, std::size_t n);

/// Copies the selected rows into a new SampleSet (keeps the seed tag).
SampleSet subset(const SampleSet& samples, const std::vector<std::size_t>& idx);

/// Gain vectors encode as themselves; complex matrices traverse row-major
/// emitting (Re, Im) per entry, giving 2 * n_rx * n_tx features.
std::vector<double> encode_features(const Parameter& g);

/// Inverse of encode_features; `shape_like` supplies the parameter kind and
/// dimensions.
Parameter decode_features(const std::vector<double>& f, const Parameter& shape_like);

// ---------------------------------------------------------------------------
// Utility evaluation
// ---------------------------------------------------------------------------

double eval_multiband_ee(const PowerVector& p, const std::vector<double>& g,
                         const MultiBandEEConfig& cfg);
double eval_sum_rate(const PowerVector& p, const std::vector<double>& g,
                     const SumRateConfig& cfg);
/// log2 det computed through a Cholesky factorization of I + H Q H^H / sigma2.
double eval_mimo_ee(const EgtDecision& d, const CMatrix& h, const MimoEEConfig& cfg);

/// One of the three concrete utility families (or the quadratic proxy),
/// dispatching decision/parameter kinds and owning all physical constants.
/// evaluate() is a pure function, safe to call concurrently.
struct UtilityModel {
  std::variant<MultiBandEEConfig, SumRateConfig, MimoEEConfig, NegSquaredDistanceConfig>
      config;

  double evaluate(const Decision& d, const Parameter& g) const;

  /// Feature dimension of compatible parameters.
  int parameter_dim() const;
};

// ---------------------------------------------------------------------------
// EGT decision sets (MIMO)
// ---------------------------------------------------------------------------

/// All EGT decisions with total power p: one per nonzero antenna mask,
/// 2^n_tx - 1 in total. Masks are ordered by active-antenna count ascending,
/// then by antenna-index subset lexicographically, so for n_tx = 2 the order
/// is (1,0), (0,1), (1,1).
DecisionSet build_egt_decision_set(const MimoEEConfig& cfg, double p);

/// Nested chain D_1 c D_2 c ... c D_k_max, each step adding one decision
/// drawn uniformly among those not yet chosen. Deterministic given seed.
std::vector<DecisionSet> grow_nested_decision_sets(const DecisionSet& full,
                                                   std::size_t k_max,
                                                   std::uint64_t seed);

/// Grid value P maximizing the empirical mean of
/// max_{Q in build_egt_decision_set(., P)} u(Q; H) over the samples; the trace
/// budget of the candidate config is set to P while scanning. Ties break
/// toward smaller P.
double find_pstar(const MimoEEConfig& cfg, const std::vector<double>& p_grid,
                  const SampleSet& samples);

/// Default search grid 1, 2, ..., 2*p0 mW.
std::vector<double> default_pstar_grid(const MimoEEConfig& cfg);

}  // namespace doq
