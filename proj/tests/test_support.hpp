#pragma once

// Shared fixtures and independent oracles for the unit and acceptance
// suites. Everything here recomputes expectations from raw data, never
// through the Gram-trace code path it is checking.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "binquant/factorization.hpp"
#include "binquant/gram.hpp"
#include "binquant/kernels.hpp"
#include "binquant/prng.hpp"

namespace binquant::testsupport {

// Deterministic scalar stream for test data.
struct TestRng {
  CounterRng rng;
  std::uint64_t at = 0;
  explicit TestRng(std::uint64_t seed, std::uint64_t stream = 9000)
      : rng(seed, stream) {}
  double normal() { return rng.normal(at++); }
  double uniform() { return rng.uniform(at++); }  // (0,1]
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t index(std::uint64_t n) { return rng.bits(at++) % n; }
};

inline DenseMatrix random_matrix(TestRng& r, std::size_t rows, std::size_t cols) {
  DenseMatrix m(rows, cols);
  for (double& v : m.data) v = r.normal();
  return m;
}

inline DenseMatrix random_signs(TestRng& r, std::size_t rows, std::size_t cols) {
  DenseMatrix m(rows, cols);
  for (double& v : m.data) v = r.normal() < 0 ? -1.0 : 1.0;
  return m;
}

inline std::vector<double> random_scales(TestRng& r, std::size_t n,
                                         bool allow_negative = false) {
  std::vector<double> v(n);
  for (double& x : v) {
    x = r.uniform(0.5, 2.0);
    if (allow_negative && r.uniform() < 0.25) x = -x;
  }
  return v;
}

struct Instance {
  DenseMatrix w, x, x_hat;
  GramBundle grams;
  BinaryFactorization f;
};

// A random problem whose Grams come from actual data, so they are
// consistent for every alignment mode.
inline Instance random_instance(TestRng& r, std::size_t d_in, std::size_t d_out,
                                std::size_t n, double noise = 0.3,
                                bool mixed_scales = false) {
  Instance inst;
  inst.w = random_matrix(r, d_in, d_out);
  inst.x = random_matrix(r, n, d_in);
  inst.x_hat = inst.x;
  for (double& v : inst.x_hat.data) v += noise * r.normal();
  inst.grams = grams_from_data(inst.x, inst.x_hat);
  inst.f.b = random_signs(r, d_in, d_out);
  inst.f.alpha_r = random_scales(r, d_in, mixed_scales);
  inst.f.alpha_c = random_scales(r, d_out, mixed_scales);
  return inst;
}

// W with rank-1 magnitude: W = diag(r)·s·diag(c) with r, c > 0.
inline DenseMatrix rank1_magnitude_matrix(TestRng& r, std::size_t d_in,
                                          std::size_t d_out) {
  DenseMatrix w(d_in, d_out);
  std::vector<double> rs = random_scales(r, d_in);
  std::vector<double> cs = random_scales(r, d_out);
  for (std::size_t i = 0; i < d_in; ++i)
    for (std::size_t j = 0; j < d_out; ++j)
      w(i, j) = rs[i] * cs[j] * (r.normal() < 0 ? -1.0 : 1.0);
  return w;
}

// Mode-faithful objective recomputed from raw activations, independent of
// the Gram-trace formula.
inline double direct_objective(const Instance& inst, AlignmentMode mode) {
  const DenseMatrix w_hat = inst.f.reconstruct();
  switch (mode) {
    case AlignmentMode::Weight:
      return frobenius_norm_sq(subtract(inst.w, w_hat));
    case AlignmentMode::ActivationConditioned:
      return frobenius_norm_sq(
          subtract(matmul(inst.x_hat, inst.w), matmul(inst.x_hat, w_hat)));
    case AlignmentMode::Output:
      return frobenius_norm_sq(
          subtract(matmul(inst.x, inst.w), matmul(inst.x_hat, w_hat)));
  }
  return 0.0;
}

// Per-column one-dimensional least-squares minimizer for alpha_c[j]:
// the scalar a minimizing the mode objective with only that coordinate
// free, computed from the raw activation matrices.
inline std::vector<double> alpha_c_one_dim_oracle(const Instance& inst,
                                                  AlignmentMode mode) {
  const std::size_t d_out = inst.f.d_out();
  const DenseMatrix a = row_scale(inst.f.alpha_r, inst.f.b);  // diag(ar)·B
  DenseMatrix lhs, target;  // columns: X̂·(A e_j), targets X·W e_j (per mode)
  switch (mode) {
    case AlignmentMode::Weight:
      lhs = a;
      target = inst.w;
      break;
    case AlignmentMode::ActivationConditioned:
      lhs = matmul(inst.x_hat, a);
      target = matmul(inst.x_hat, inst.w);
      break;
    case AlignmentMode::Output:
      lhs = matmul(inst.x_hat, a);
      target = matmul(inst.x, inst.w);
      break;
  }
  std::vector<double> out(d_out);
  for (std::size_t j = 0; j < d_out; ++j) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < lhs.rows; ++i) {
      num += lhs(i, j) * target(i, j);
      den += lhs(i, j) * lhs(i, j);
    }
    out[j] = den > 0.0 ? num / den : inst.f.alpha_c[j];
  }
  return out;
}

// Central finite difference of a scalar function.
inline double central_diff(const std::function<double(double)>& fn, double at,
                           double step) {
  return (fn(at + step) - fn(at - step)) / (2.0 * step);
}

// Dense solve by Gaussian elimination with partial pivoting; oracle for
// lstsq_solve on full-rank systems.
inline std::vector<double> gauss_solve(DenseMatrix a, std::vector<double> b) {
  const std::size_t n = a.rows;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t i = col + 1; i < n; ++i)
      if (std::abs(a(i, col)) > std::abs(a(piv, col))) piv = i;
    if (piv != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(col, j), a(piv, j));
      std::swap(b[col], b[piv]);
    }
    for (std::size_t i = col + 1; i < n; ++i) {
      const double m = a(i, col) / a(col, col);
      for (std::size_t j = col; j < n; ++j) a(i, j) -= m * a(col, j);
      b[i] -= m * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
    x[i] = s / a(i, i);
  }
  return x;
}

inline bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

constexpr AlignmentMode kAllModes[] = {AlignmentMode::Weight,
                                       AlignmentMode::ActivationConditioned,
                                       AlignmentMode::Output};

}  // namespace binquant::testsupport
