#pragma once

#include "binquant/matrix.hpp"

namespace binquant {

// Calibration Gram matrices, accumulated over batches in a fixed
// sequential order. S = X̂ᵀX (cross), Ŝ = X̂ᵀX̂, S_ff = XᵀX.
struct GramBundle {
  DenseMatrix s;      // X̂ᵀX
  DenseMatrix s_hat;  // X̂ᵀX̂
  DenseMatrix s_ff;   // XᵀX
  std::size_t n_samples = 0;

  std::size_t dim() const { return s.rows; }
};

GramBundle make_gram_bundle(std::size_t d_in);

void gram_accumulate(GramBundle& acc, const DenseMatrix& x_fp,
                     const DenseMatrix& x_q);

GramBundle grams_from_data(const DenseMatrix& x_fp, const DenseMatrix& x_q);

// M = S·W·Wᵀ·Sᵀ = (SW)(SW)ᵀ, symmetrized as (M+Mᵀ)/2 so M = Mᵀ exactly.
DenseMatrix amp_gram(const DenseMatrix& s, const DenseMatrix& w);

// Stable minimal-norm least-squares solve of a square system; singular
// values below 1e-10·σ_max are treated as zero.
std::vector<double> lstsq_solve(const DenseMatrix& a, const std::vector<double>& b);

}  // namespace binquant
