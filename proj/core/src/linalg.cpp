#include "doq/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace doq {

double log2_det_identity_plus(CMatrix a) {
  if (a.rows != a.cols) {
    throw std::invalid_argument("log2_det_identity_plus: matrix must be square");
  }
  const std::size_t n = a.rows;
  for (std::size_t i = 0; i < n; ++i) {
    a(i, i) += 1.0;
  }

  // In-place lower Cholesky of I + A; det = prod of pivots, accumulated in
  // log2 before the square roots.
  double log2_det = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double pivot = a(j, j).real();
    for (std::size_t k = 0; k < j; ++k) {
      pivot -= std::norm(a(j, k));
    }
    if (!(pivot > 0.0)) {
      throw std::runtime_error("log2_det_identity_plus: matrix is not positive definite");
    }
    log2_det += std::log2(pivot);
    const double ljj = std::sqrt(pivot);
    a(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      std::complex<double> s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) {
        s -= a(i, k) * std::conj(a(j, k));
      }
      a(i, j) = s / ljj;
    }
  }
  return log2_det;
}

}  // namespace doq
