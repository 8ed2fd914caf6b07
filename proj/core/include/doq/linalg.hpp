#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace doq {

/// Dense row-major complex matrix. Sized for small antenna arrays, so no
/// expression templates, no BLAS; plain loops are fine.
struct CMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::complex<double>> data;  // row-major, rows*cols entries

  CMatrix() = default;
  CMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}

  std::complex<double>& operator()(std::size_t i, std::size_t j) {
    return data[i * cols + j];
  }
  const std::complex<double>& operator()(std::size_t i, std::size_t j) const {
    return data[i * cols + j];
  }

  friend bool operator==(const CMatrix& a, const CMatrix& b) {
    return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
  }
};

/// log2 det(I + A) for Hermitian positive semidefinite A, via an in-place
/// Cholesky factorization of I + A. Throws std::runtime_error if a pivot is
/// not strictly positive (I + A positive definite rules that out for any
/// PSD input up to rounding).
double log2_det_identity_plus(CMatrix a);

/// Compensated (Kahan) accumulator. Monte-Carlo means compare utilities that
/// may differ by 1e-12; plain recursive summation over 1e5 terms is too noisy
/// for that.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;

  void add(double x) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  double value() const { return sum; }
};

}  // namespace doq
