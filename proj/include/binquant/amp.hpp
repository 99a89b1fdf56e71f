#pragma once

#include <cstdint>
#include <vector>

#include "binquant/factorization.hpp"
#include "binquant/matrix.hpp"

namespace binquant {

// How raw gradient signs gate parameter updates. Off passes everything
// through; Agreement accepts a coordinate only when the move agrees with
// the AMP ascent direction; Heaviside accepts wherever the raw sign is
// nonnegative.
enum class AmpPolicy { Off, Agreement, Heaviside };

// raw_* hold the exact sign (−1/0/+1) of the analytic gradient of
// Tr[ŴᵀMŴ] with respect to each coordinate.
struct AmpMasks {
  std::vector<std::int8_t> raw_r;  // d_in
  std::vector<std::int8_t> raw_c;  // d_out
  DenseMatrix raw_b;               // d_in × d_out, values in {−1,0,+1}
};

double amp_objective(const BinaryFactorization& f, const DenseMatrix& m);

// Analytic gradients of amp_objective.
DenseMatrix amp_grad_b(const BinaryFactorization& f, const DenseMatrix& m);
std::vector<double> amp_grad_alpha_r(const BinaryFactorization& f, const DenseMatrix& m);
std::vector<double> amp_grad_alpha_c(const BinaryFactorization& f, const DenseMatrix& m);

AmpMasks amp_raw_masks(const BinaryFactorization& f, const DenseMatrix& m);

// {0,1} selectors for a scale vector / a proposed B row under a policy.
std::vector<std::uint8_t> select_scales(const std::vector<std::int8_t>& raw,
                                        const std::vector<double>& proposed,
                                        const std::vector<double>& current,
                                        AmpPolicy policy);
std::vector<std::uint8_t> select_b_row(const DenseMatrix& raw_b,
                                       std::size_t row_index,
                                       const std::vector<double>& proposed_row,
                                       AmpPolicy policy);

// Coordinates with selector 1 take the proposed value; 0 keeps the incumbent.
void masked_update_scales(std::vector<double>& target,
                          const std::vector<double>& proposed,
                          const std::vector<std::uint8_t>& selectors);
void masked_update_b_row(DenseMatrix& b, std::size_t row_index,
                         const std::vector<double>& proposed_row,
                         const std::vector<std::uint8_t>& selectors);

// Fraction of selector-1 coordinates.
double acceptance_ratio(const std::vector<std::uint8_t>& selectors);

}  // namespace binquant
