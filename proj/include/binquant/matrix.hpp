#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace binquant {

// Dense row-major matrix of doubles. All solver arithmetic is 64-bit
// regardless of on-disk dtype.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  double& operator()(std::size_t i, std::size_t j) {
    assert(i < rows && j < cols);
    return data[i * cols + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    assert(i < rows && j < cols);
    return data[i * cols + j];
  }

  std::size_t size() const { return rows * cols; }
  bool empty() const { return data.empty(); }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool operator==(const DenseMatrix& o) const {
    return rows == o.rows && cols == o.cols && data == o.data;
  }
};

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("dimension mismatch: " + what);
}

inline DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix out(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) out(j, i) = a(i, j);
  return out;
}

// <a, b>_F = sum_ij a_ij * b_ij, accumulated in row-major order.
inline double frobenius_dot(const DenseMatrix& a, const DenseMatrix& b) {
  require_dims(a.rows == b.rows && a.cols == b.cols, "frobenius_dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

inline double frobenius_norm_sq(const DenseMatrix& a) {
  double s = 0.0;
  for (double v : a.data) s += v * v;
  return s;
}

inline DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
  require_dims(a.rows == b.rows && a.cols == b.cols, "hadamard");
  DenseMatrix out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i)
    out.data[i] = a.data[i] * b.data[i];
  return out;
}

inline DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b) {
  require_dims(a.rows == b.rows && a.cols == b.cols, "subtract");
  DenseMatrix out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i)
    out.data[i] = a.data[i] - b.data[i];
  return out;
}

// diag(v) * a
inline DenseMatrix row_scale(const std::vector<double>& v, const DenseMatrix& a) {
  require_dims(v.size() == a.rows, "row_scale");
  DenseMatrix out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) out(i, j) = v[i] * a(i, j);
  return out;
}

// a * diag(v)
inline DenseMatrix col_scale(const DenseMatrix& a, const std::vector<double>& v) {
  require_dims(v.size() == a.cols, "col_scale");
  DenseMatrix out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) out(i, j) = a(i, j) * v[j];
  return out;
}

// diag(v) * s * diag(v), computed as (v_i*v_j)*s_ij so the result is
// bitwise symmetric whenever s is.
inline DenseMatrix sym_scale(const DenseMatrix& s, const std::vector<double>& v) {
  require_dims(s.rows == s.cols && v.size() == s.rows, "sym_scale");
  DenseMatrix out(s.rows, s.cols);
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < s.cols; ++j) out(i, j) = (v[i] * v[j]) * s(i, j);
  return out;
}

// diagonal of aᵀ·b: v_j = sum_i a(i,j) * b(i,j)
inline std::vector<double> diag_of_atb(const DenseMatrix& a, const DenseMatrix& b) {
  require_dims(a.rows == b.rows && a.cols == b.cols, "diag_of_atb");
  std::vector<double> v(a.cols, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) v[j] += a(i, j) * b(i, j);
  return v;
}

// diagonal of a·bᵀ: v_i = sum_j a(i,j) * b(i,j)
inline std::vector<double> diag_of_abt(const DenseMatrix& a, const DenseMatrix& b) {
  require_dims(a.rows == b.rows && a.cols == b.cols, "diag_of_abt");
  std::vector<double> v(a.rows, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) v[i] += a(i, j) * b(i, j);
  return v;
}

inline int sign_of(double x) { return x > 0.0 ? 1 : (x < 0.0 ? -1 : 0); }

}  // namespace binquant
