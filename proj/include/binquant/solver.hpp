#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "binquant/amp.hpp"
#include "binquant/factorization.hpp"
#include "binquant/gram.hpp"

namespace binquant {

struct SolverConfig {
  int iters = 15;           // T
  int alpha_c_period = 5;   // k: refine α_c when (t+1) mod k == 0
  int b_rows_per_iter = 2;  // greedy single-row B updates per iteration
  AlignmentMode mode = AlignmentMode::Output;
  AmpPolicy amp_policy = AmpPolicy::Agreement;
  std::size_t block_width = 128;  // g
  double rel_tol = 1e-6;          // early exit; 0 disables
  std::uint64_t seed = 0;
  int scale_bits = 16;

  void validate() const;
};

enum class StepKind { AlphaR, AlphaC, BRow };

const char* step_kind_name(StepKind k);

struct TraceStep {
  StepKind kind;
  std::size_t block;
  int iter;  // 1-based iteration within the block solve
  double objective;      // mode objective after the step
  double amp_objective;  // Tr[ŴᵀMŴ] after the step
  double accept_ratio;   // fraction of selector-1 coordinates in the step
};

struct SolveTrace {
  std::vector<TraceStep> steps;
};

struct BlockSolve {
  BinaryFactorization fact;
  SolveTrace trace;
  std::size_t block_index = 0;
  std::size_t col_begin = 0;
  std::size_t col_end = 0;
  int iterations = 0;
  int alpha_c_fallbacks = 0;
};

// One column block of Algorithm "Our-RC": per iteration an α_r step, a
// scheduled α_c step, and b_rows_per_iter greedy B-row steps, each gated
// by the AMP masks. M is built once from the mode-effective S and the
// block's W.
BlockSolve solve_block(const DenseMatrix& w_block, const GramBundle& grams,
                       const SolverConfig& cfg, std::size_t block_index = 0);

// Same loop started from an existing factorization instead of the
// default initialization.
BlockSolve solve_block_from(BinaryFactorization f, const DenseMatrix& w_block,
                            const GramBundle& grams, const SolverConfig& cfg,
                            std::size_t block_index = 0);

struct SolveResult {
  std::vector<BlockSolve> blocks;
  SolveTrace trace;  // all block traces, in block order
  std::size_t d_in = 0;
  std::size_t d_out = 0;
};

// Partitions W's columns into ceil(d_out/g) contiguous blocks, solved
// independently against the same GramBundle (possibly in parallel).
SolveResult solve(const DenseMatrix& w, const GramBundle& grams,
                  const SolverConfig& cfg);

DenseMatrix reconstruct_solution(const SolveResult& r);

// Storage accounting under this artifact's layout (per block: an α_r of
// length d_in, an α_c of the block width, B at 1 bit per entry). Not the
// accounting used in the literature tables.
double bits_per_weight(std::size_t d_in, std::size_t d_out,
                       std::size_t block_width, int scale_bits);

}  // namespace binquant
