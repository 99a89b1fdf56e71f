#pragma once

#include "binquant/matrix.hpp"

namespace binquant {

// Dense products. The parallel versions split work over output rows only;
// each output element is reduced sequentially in ascending index order
// (i-k-j nesting), so results are bit-identical to the serial reference
// regardless of thread count.

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);       // a·b
DenseMatrix matmul_at_b(const DenseMatrix& a, const DenseMatrix& b);  // aᵀ·b
DenseMatrix matmul_a_bt(const DenseMatrix& a, const DenseMatrix& b);  // a·bᵀ

// Serial reference implementations, kept for testing and benchmarking.
namespace serial {
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix matmul_at_b(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix matmul_a_bt(const DenseMatrix& a, const DenseMatrix& b);
}  // namespace serial

}  // namespace binquant
