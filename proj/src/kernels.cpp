#include "binquant/kernels.hpp"

#include <cstdint>

#include "binquant/threading.hpp"

namespace binquant {

namespace {

// Parallel regions only pay off once there is real work per row.
constexpr std::uint64_t kParallelFlops = 1u << 15;

inline bool go_parallel(std::size_t rows, std::size_t inner, std::size_t cols) {
  return worker_count() > 1 &&
         static_cast<std::uint64_t>(rows) * inner * cols >= kParallelFlops;
}

inline void matmul_row(const DenseMatrix& a, const DenseMatrix& b,
                       DenseMatrix& out, std::size_t i) {
  for (std::size_t k = 0; k < a.cols; ++k) {
    const double aik = a(i, k);
    const double* brow = &b.data[k * b.cols];
    double* orow = &out.data[i * out.cols];
    for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
  }
}

inline void at_b_row(const DenseMatrix& a, const DenseMatrix& b,
                     DenseMatrix& out, std::size_t i) {
  for (std::size_t r = 0; r < a.rows; ++r) {
    const double ari = a(r, i);
    const double* brow = &b.data[r * b.cols];
    double* orow = &out.data[i * out.cols];
    for (std::size_t j = 0; j < b.cols; ++j) orow[j] += ari * brow[j];
  }
}

inline void a_bt_row(const DenseMatrix& a, const DenseMatrix& b,
                     DenseMatrix& out, std::size_t i) {
  const double* arow = &a.data[i * a.cols];
  for (std::size_t j = 0; j < b.rows; ++j) {
    const double* brow = &b.data[j * b.cols];
    double s = 0.0;
    for (std::size_t t = 0; t < a.cols; ++t) s += arow[t] * brow[t];
    out(i, j) = s;
  }
}

}  // namespace

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  require_dims(a.cols == b.rows, "matmul");
  DenseMatrix out(a.rows, b.cols, 0.0);
  const std::int64_t n = static_cast<std::int64_t>(a.rows);
  if (go_parallel(a.rows, a.cols, b.cols)) {
#pragma omp parallel for schedule(static) num_threads(worker_count())
    for (std::int64_t i = 0; i < n; ++i) matmul_row(a, b, out, i);
  } else {
    for (std::int64_t i = 0; i < n; ++i) matmul_row(a, b, out, i);
  }
  return out;
}

DenseMatrix matmul_at_b(const DenseMatrix& a, const DenseMatrix& b) {
  require_dims(a.rows == b.rows, "matmul_at_b");
  DenseMatrix out(a.cols, b.cols, 0.0);
  const std::int64_t n = static_cast<std::int64_t>(a.cols);
  if (go_parallel(a.cols, a.rows, b.cols)) {
#pragma omp parallel for schedule(static) num_threads(worker_count())
    for (std::int64_t i = 0; i < n; ++i) at_b_row(a, b, out, i);
  } else {
    for (std::int64_t i = 0; i < n; ++i) at_b_row(a, b, out, i);
  }
  return out;
}

DenseMatrix matmul_a_bt(const DenseMatrix& a, const DenseMatrix& b) {
  require_dims(a.cols == b.cols, "matmul_a_bt");
  DenseMatrix out(a.rows, b.rows, 0.0);
  const std::int64_t n = static_cast<std::int64_t>(a.rows);
  if (go_parallel(a.rows, a.cols, b.rows)) {
#pragma omp parallel for schedule(static) num_threads(worker_count())
    for (std::int64_t i = 0; i < n; ++i) a_bt_row(a, b, out, i);
  } else {
    for (std::int64_t i = 0; i < n; ++i) a_bt_row(a, b, out, i);
  }
  return out;
}

namespace serial {

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  require_dims(a.cols == b.rows, "matmul");
  DenseMatrix out(a.rows, b.cols, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) matmul_row(a, b, out, i);
  return out;
}

DenseMatrix matmul_at_b(const DenseMatrix& a, const DenseMatrix& b) {
  require_dims(a.rows == b.rows, "matmul_at_b");
  DenseMatrix out(a.cols, b.cols, 0.0);
  for (std::size_t i = 0; i < a.cols; ++i) at_b_row(a, b, out, i);
  return out;
}

DenseMatrix matmul_a_bt(const DenseMatrix& a, const DenseMatrix& b) {
  require_dims(a.cols == b.cols, "matmul_a_bt");
  DenseMatrix out(a.rows, b.rows, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) a_bt_row(a, b, out, i);
  return out;
}

}  // namespace serial

}  // namespace binquant
