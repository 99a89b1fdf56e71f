#pragma once

#include <cstdint>
#include <vector>

#include "binquant/gram.hpp"
#include "binquant/matrix.hpp"

namespace binquant {

// Which Grams the objective sees. Weight alignment is the identity-Gram
// special case; ActivationConditioned uses X̂ᵀX̂ everywhere; Output uses
// the bundle as accumulated.
enum class AlignmentMode { Weight, ActivationConditioned, Output };

struct EffectiveGrams {
  DenseMatrix s, s_hat, s_ff;
};

EffectiveGrams effective_grams(const GramBundle& g, AlignmentMode mode,
                               std::size_t d_in);

// Ŵ = diag(α_r)·B·diag(α_c) with B ∈ {−1,+1}^{d_in×d_out}.
struct BinaryFactorization {
  std::vector<double> alpha_r;  // d_in
  std::vector<double> alpha_c;  // d_out
  DenseMatrix b;                // entries exactly ±1

  std::size_t d_in() const { return b.rows; }
  std::size_t d_out() const { return b.cols; }

  DenseMatrix reconstruct() const;
  void validate() const;
};

// B = sign(W) with zeros mapped to +1, α_r = 1, α_c[j] = mean |W[:,j]|.
BinaryFactorization init_factorization(const DenseMatrix& w);

// Tr[S_ff·W·Wᵀ] − 2·Tr[S·W·Ŵᵀ] + Tr[Ŝ·Ŵ·Ŵᵀ] under the mode-effective
// Grams. Equals ‖W−Ŵ‖²_F in Weight mode and ‖XW−X̂Ŵ‖²_F in Output mode
// when the Grams were accumulated from (X, X̂).
double objective(const BinaryFactorization& f, const DenseMatrix& w,
                 const GramBundle& grams, AlignmentMode mode);

struct ScaleProposal {
  std::vector<double> value;
  int fallback_count = 0;  // coordinates that kept the incumbent value
};

// Elementwise Diag(Bᵀdiag(α_r)SW) / Diag(Bᵀdiag(α_r)Ŝdiag(α_r)B); a
// coordinate whose denominator magnitude is < 1e−12·max falls back to
// the incumbent α_c value.
ScaleProposal refine_alpha_c(const BinaryFactorization& f, const DenseMatrix& w,
                             const GramBundle& grams, AlignmentMode mode);

// Solves (Ŝ ⊙ C)·α_r = Diag(SWdiag(α_c)Bᵀ), C = B·diag(α_c⊙α_c)·Bᵀ.
std::vector<double> refine_alpha_r(const BinaryFactorization& f,
                                   const DenseMatrix& w,
                                   const GramBundle& grams, AlignmentMode mode);

// Shared intermediates of the closed-form refiners. N and C are exactly
// symmetric, N_F has a zero diagonal, K entries are nonnegative.
struct RefinerWorkspace {
  DenseMatrix n;                // diag(α_r)·Ŝ·diag(α_r)
  DenseMatrix n_f;              // N with the diagonal zeroed
  std::vector<double> k_diag;   // α_c ⊙ α_c
  DenseMatrix p;                // diag(α_r)·S·W·diag(α_c)
  DenseMatrix c;                // B·diag(α_c ⊙ α_c)·Bᵀ
};

RefinerWorkspace make_refiner_workspace(const BinaryFactorization& f,
                                        const DenseMatrix& w,
                                        const GramBundle& grams,
                                        AlignmentMode mode);

struct RowScores {
  DenseMatrix scores;     // d_in × d_out
  std::size_t row_index;  // argmax_j Σ_k B[j,k]·scores[j,k], ties → smallest
};

// scores = 2·N_F·B·K − 2·P: the exact linear coefficient of the objective
// restricted to one row of B, with N = diag(α_r)·Ŝ·diag(α_r), K =
// diag(α_c⊙α_c), P = diag(α_r)·S·W·diag(α_c).
RowScores refine_b_scores(const BinaryFactorization& f, const DenseMatrix& w,
                          const GramBundle& grams, AlignmentMode mode);

// Loss-minimizing row: −sign(scores) entrywise, zero scores keep the
// incumbent entry.
std::vector<double> refine_b_row(const BinaryFactorization& f,
                                 std::size_t row_index,
                                 const DenseMatrix& scores);

// Jacobi-style simultaneous application of the row rule to every row.
// Monotone descent is not guaranteed (stale cross-row terms); off by
// default in the solver.
DenseMatrix refine_b_full_sweep(const BinaryFactorization& f,
                                const DenseMatrix& w, const GramBundle& grams,
                                AlignmentMode mode);

// Exhaustive 2^d_out ground truth for one row (d_out ≤ 16); smallest
// lexicographic row on objective ties.
std::vector<double> oracle_row_enumeration(const BinaryFactorization& f,
                                           const DenseMatrix& w,
                                           const GramBundle& grams,
                                           AlignmentMode mode,
                                           std::size_t row_index);

// Analytic gradients of the objective (mode-effective Grams).
std::vector<double> objective_grad_alpha_r(const BinaryFactorization& f,
                                           const DenseMatrix& w,
                                           const GramBundle& grams,
                                           AlignmentMode mode);
std::vector<double> objective_grad_alpha_c(const BinaryFactorization& f,
                                           const DenseMatrix& w,
                                           const GramBundle& grams,
                                           AlignmentMode mode);

}  // namespace binquant
