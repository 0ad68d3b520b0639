#ifndef IBFLOW_MATRIX_HPP
#define IBFLOW_MATRIX_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ibflow/error.hpp"

namespace ibflow {

/// Row-major (samples x features) matrix. Row i is one observation,
/// column j one feature dimension.
struct SampleMatrix {
  std::vector<double> data;
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;

  SampleMatrix() = default;
  SampleMatrix(std::size_t rows, std::size_t cols)
      : data(rows * cols, 0.0), n_rows(rows), n_cols(cols) {}

  double& at(std::size_t i, std::size_t j) { return data[i * n_cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * n_cols + j]; }

  std::span<double> row(std::size_t i) {
    return {data.data() + i * n_cols, n_cols};
  }
  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * n_cols, n_cols};
  }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

/// Symmetric covariance matrix, dense, side length `dim`.
struct CovMatrix {
  std::vector<double> data;
  std::size_t dim = 0;

  CovMatrix() = default;
  explicit CovMatrix(std::size_t d) : data(d * d, 0.0), dim(d) {}

  double& at(std::size_t i, std::size_t j) { return data[i * dim + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * dim + j]; }
};

/// Eigenvalues in descending order.
struct Spectrum {
  std::vector<double> eigenvalues;
};

inline double trace(const CovMatrix& s) {
  double t = 0.0;
  for (std::size_t i = 0; i < s.dim; ++i) t += s.at(i, i);
  return t;
}

inline bool is_symmetric(const CovMatrix& s, double rel_tol = 1e-10) {
  double scale = 0.0;
  for (double v : s.data) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < s.dim; ++i)
    for (std::size_t j = i + 1; j < s.dim; ++j)
      if (std::abs(s.at(i, j) - s.at(j, i)) > rel_tol * std::max(scale, 1e-300))
        return false;
  return true;
}

/// Subtract the column mean from every column.
inline SampleMatrix center(const SampleMatrix& x) {
  SampleMatrix out(x.n_rows, x.n_cols);
  std::vector<double> mean(x.n_cols, 0.0);
  for (std::size_t i = 0; i < x.n_rows; ++i)
    for (std::size_t j = 0; j < x.n_cols; ++j) mean[j] += x.at(i, j);
  for (auto& m : mean) m /= static_cast<double>(x.n_rows);
  for (std::size_t i = 0; i < x.n_rows; ++i)
    for (std::size_t j = 0; j < x.n_cols; ++j)
      out.at(i, j) = x.at(i, j) - mean[j];
  return out;
}

/// Population covariance (divide by N) of the centered data.
inline CovMatrix covariance(const SampleMatrix& x) {
  if (x.n_rows < 2) throw Error("insufficient samples");
  SampleMatrix c = center(x);
  CovMatrix s(x.n_cols);
  const double inv_n = 1.0 / static_cast<double>(x.n_rows);
  for (std::size_t r = 0; r < c.n_rows; ++r) {
    const double* row = c.data.data() + r * c.n_cols;
    for (std::size_t i = 0; i < c.n_cols; ++i) {
      const double ri = row[i];
      double* srow = s.data.data() + i * s.dim;
      for (std::size_t j = i; j < c.n_cols; ++j) srow[j] += ri * row[j];
    }
  }
  for (std::size_t i = 0; i < s.dim; ++i)
    for (std::size_t j = i; j < s.dim; ++j) {
      s.at(i, j) *= inv_n;
      s.at(j, i) = s.at(i, j);
    }
  return s;
}

/// Cross-covariance Cov(a, b): population, a-features x b-features.
inline std::vector<double> cross_covariance(const SampleMatrix& a,
                                            const SampleMatrix& b) {
  if (a.n_rows != b.n_rows) throw Error("cross_covariance: row mismatch");
  if (a.n_rows < 2) throw Error("insufficient samples");
  SampleMatrix ca = center(a);
  SampleMatrix cb = center(b);
  std::vector<double> c(a.n_cols * b.n_cols, 0.0);
  const double inv_n = 1.0 / static_cast<double>(a.n_rows);
  for (std::size_t r = 0; r < a.n_rows; ++r)
    for (std::size_t i = 0; i < a.n_cols; ++i) {
      const double ai = ca.at(r, i);
      for (std::size_t j = 0; j < b.n_cols; ++j)
        c[i * b.n_cols + j] += ai * cb.at(r, j);
    }
  for (auto& v : c) v *= inv_n;
  return c;
}

/// All eigenvalues of a symmetric matrix, descending, by cyclic Jacobi
/// rotations. Converged when the largest off-diagonal entry falls below
/// 1e-12 times the matrix scale (the trace, for PSD inputs).
inline Spectrum sym_eigvals(const CovMatrix& s) {
  const std::size_t n = s.dim;
  if (n == 0) throw Error("sym_eigvals: empty matrix");
  if (!is_symmetric(s)) throw Error("sym_eigvals: matrix not symmetric");

  std::vector<double> a = s.data;
  double frob = 0.0;
  for (double v : a) frob += v * v;
  frob = std::sqrt(frob);
  // trace == frobenius-dominant for PSD; fall back to frobenius for
  // indefinite symmetric inputs whose trace can vanish
  const double scale = std::max(std::abs(trace(s)), frob);
  if (scale == 0.0) {
    Spectrum sp;
    sp.eigenvalues.assign(n, 0.0);
    return sp;
  }
  const double threshold = 1e-12 * scale;

  auto off_max = [&]() {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        m = std::max(m, std::abs(a[i * n + j]));
    return m;
  };

  const int max_sweeps = 100;
  int sweep = 0;
  while (off_max() > threshold) {
    if (++sweep > max_sweeps) throw Error("eigensolver did not converge");
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (std::abs(apq) <= threshold) continue;
        const double app = a[p * n + p];
        const double aqq = a[q * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p];
          const double akq = a[k * n + q];
          a[k * n + p] = c * akp - sn * akq;
          a[k * n + q] = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k];
          const double aqk = a[q * n + k];
          a[p * n + k] = c * apk - sn * aqk;
          a[q * n + k] = sn * apk + c * aqk;
        }
        a[p * n + q] = 0.0;
        a[q * n + p] = 0.0;
      }
    }
  }

  Spectrum sp;
  sp.eigenvalues.resize(n);
  for (std::size_t i = 0; i < n; ++i) sp.eigenvalues[i] = a[i * n + i];
  std::sort(sp.eigenvalues.begin(), sp.eigenvalues.end(), std::greater<>());
  return sp;
}

/// PCA spectrum: eigenvalues of the population covariance of centered data.
inline Spectrum pca_spectrum(const SampleMatrix& x) {
  return sym_eigvals(covariance(center(x)));
}

/// Column-wise concatenation [a | b]; rows must align.
inline SampleMatrix hconcat(const SampleMatrix& a, const SampleMatrix& b) {
  if (a.n_rows != b.n_rows) throw Error("hconcat: row mismatch");
  SampleMatrix out(a.n_rows, a.n_cols + b.n_cols);
  for (std::size_t i = 0; i < a.n_rows; ++i) {
    std::copy_n(a.data.data() + i * a.n_cols, a.n_cols,
                out.data.data() + i * out.n_cols);
    std::copy_n(b.data.data() + i * b.n_cols, b.n_cols,
                out.data.data() + i * out.n_cols + a.n_cols);
  }
  return out;
}

/// Rows of m selected by idx, in order.
inline SampleMatrix take_rows(const SampleMatrix& m,
                              const std::vector<std::size_t>& idx) {
  SampleMatrix out(idx.size(), m.n_cols);
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy_n(m.data.data() + idx[i] * m.n_cols, m.n_cols,
                out.data.data() + i * out.n_cols);
  return out;
}

}  // namespace ibflow

#endif  // IBFLOW_MATRIX_HPP
