// Test-only oracles, kept independent of the library's computation paths:
// the MIMO utility is recomputed through an eigendecomposition instead of the
// Cholesky factorization, and threshold/partition values come from dense
// scans refined by bisection rather than the closed forms under test.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "doq/model.hpp"

namespace doq::testing {

/// u^MIMO recomputed as r0 * sum_i log2(1 + lambda_i) / (tr(Q) + p0), with
/// lambda_i the eigenvalues of H Q H^H / sigma2 from Eigen's self-adjoint
/// solver.
inline double mimo_ee_eigen_oracle(const EgtDecision& d, const CMatrix& h,
                                   const MimoEEConfig& cfg) {
  const int nr = cfg.n_rx;
  const int nt = cfg.n_tx;
  Eigen::MatrixXcd hm(nr, nt);
  for (int i = 0; i < nr; ++i) {
    for (int j = 0; j < nt; ++j) {
      hm(i, j) = h(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
  }
  int l = 0;
  for (auto b : d.mask) l += (b != 0);
  Eigen::MatrixXcd q = Eigen::MatrixXcd::Zero(nt, nt);
  for (int j = 0; j < nt; ++j) {
    if (d.mask[static_cast<std::size_t>(j)]) q(j, j) = d.scale / static_cast<double>(l);
  }
  const Eigen::MatrixXcd a = hm * q * hm.adjoint() / cfg.sigma2;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(a);
  double log2det = 0.0;
  for (int i = 0; i < nr; ++i) {
    log2det += std::log2(1.0 + std::max(0.0, solver.eigenvalues()(i)));
  }
  return cfg.r0 * log2det / (d.scale + cfg.p0);
}

/// Crossing gain of u(p_low; g) and u(p_high; g) for the single-band EE:
/// scans g upward in fixed steps until the preference flips, then bisects.
/// Below the crossing the larger power wins, above it the smaller one does.
inline double scan_threshold_crossing(double p_low, double p_high, double c, double sigma2,
                                      double g_max, double step = 1e-4) {
  const auto u = [&](double p, double g) { return std::exp(-c * sigma2 / (p * g)) / p; };
  const auto high_wins = [&](double g) { return u(p_high, g) > u(p_low, g); };

  // start where exp(-c*sigma2/(p*g)) is still representable; below that both
  // utilities underflow to zero and the comparison is meaningless
  double g_prev = std::max(step, c * sigma2 / (600.0 * p_low));
  if (!high_wins(g_prev)) {
    throw std::runtime_error("scan_threshold_crossing: high power already loses at g ~ 0");
  }
  double g = g_prev + step;
  while (g <= g_max) {
    if (!high_wins(g)) {
      double lo = g_prev, hi = g;
      for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
        const double mid = 0.5 * (lo + hi);
        (high_wins(mid) ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    }
    g_prev = g;
    g += step;
  }
  throw std::runtime_error("scan_threshold_crossing: no crossing found below g_max");
}

/// Brute-force decision boundaries of argmax_k u(P_k; g) over a dense gain
/// grid: each label change is refined by bisection on the pairwise crossing.
/// Returns (gain, label_below, label_above) triples.
struct PartitionBoundary {
  double gain;
  int label_below;
  int label_above;
};

inline std::vector<PartitionBoundary> scan_decision_partition(
    const std::vector<double>& powers, double c, double sigma2, double g_lo, double g_hi,
    int grid_points) {
  const auto u = [&](double p, double g) { return std::exp(-c * sigma2 / (p * g)) / p; };
  const auto best = [&](double g) {
    int arg = 0;
    double val = u(powers[0], g);
    for (std::size_t k = 1; k < powers.size(); ++k) {
      const double v = u(powers[k], g);
      if (v > val) {
        val = v;
        arg = static_cast<int>(k);
      }
    }
    return arg;
  };

  std::vector<PartitionBoundary> boundaries;
  double g_prev = g_lo;
  int label_prev = best(g_prev);
  for (int i = 1; i <= grid_points; ++i) {
    const double g = g_lo + (g_hi - g_lo) * static_cast<double>(i) / grid_points;
    const int label = best(g);
    if (label != label_prev) {
      double lo = g_prev, hi = g;
      for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
        const double mid = 0.5 * (lo + hi);
        (best(mid) == label_prev ? lo : hi) = mid;
      }
      boundaries.push_back({0.5 * (lo + hi), label_prev, label});
    }
    g_prev = g;
    label_prev = label;
  }
  return boundaries;
}

}  // namespace doq::testing
