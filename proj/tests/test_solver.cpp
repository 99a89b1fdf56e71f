#include <algorithm>
#include <cmath>
#include <limits>

#include "doctest.h"

#include "binquant/solver.hpp"
#include "test_support.hpp"

using namespace binquant;
namespace ts = binquant::testsupport;

namespace {

SolverConfig quick_cfg(AlignmentMode mode, AmpPolicy amp, int iters = 10) {
  SolverConfig cfg;
  cfg.mode = mode;
  cfg.amp_policy = amp;
  cfg.iters = iters;
  cfg.block_width = 128;
  return cfg;
}

// The solver loop with every AMP call stripped out; the Off policy must be
// bit-identical to this.
BinaryFactorization plain_loop(const DenseMatrix& w, const GramBundle& grams,
                               const SolverConfig& cfg) {
  BinaryFactorization f = init_factorization(w);
  double obj = objective(f, w, grams, cfg.mode);
  for (int t = 1; t <= cfg.iters; ++t) {
    const double start = obj;
    f.alpha_r = refine_alpha_r(f, w, grams, cfg.mode);
    if ((t + 1) % cfg.alpha_c_period == 0)
      f.alpha_c = refine_alpha_c(f, w, grams, cfg.mode).value;
    for (int r = 0; r < cfg.b_rows_per_iter; ++r) {
      const RowScores rs = refine_b_scores(f, w, grams, cfg.mode);
      const std::vector<double> row = refine_b_row(f, rs.row_index, rs.scores);
      for (std::size_t k = 0; k < row.size(); ++k) f.b(rs.row_index, k) = row[k];
    }
    obj = objective(f, w, grams, cfg.mode);
    if (cfg.rel_tol > 0.0 &&
        (start - obj) < cfg.rel_tol * std::max(std::abs(start), 1e-30))
      break;
  }
  return f;
}

}  // namespace

TEST_CASE("rank-1-magnitude W reaches exact representation in Weight mode") {
  ts::TestRng r(61);
  for (int trial = 0; trial < 10; ++trial) {
    const DenseMatrix w = ts::rank1_magnitude_matrix(r, 6, 4);
    const GramBundle empty;
    const BlockSolve bs =
        solve_block(w, empty, quick_cfg(AlignmentMode::Weight, AmpPolicy::Off, 5));
    CHECK(objective(bs.fact, w, empty, AlignmentMode::Weight) <=
          1e-10 * frobenius_norm_sq(w));
  }
}

TEST_CASE("T=1 with k=5 never refines alpha_c") {
  ts::TestRng r(62);
  ts::Instance inst = ts::random_instance(r, 6, 4, 10);
  SolverConfig cfg = quick_cfg(AlignmentMode::Output, AmpPolicy::Off, 1);
  cfg.alpha_c_period = 5;
  const BlockSolve bs = solve_block(inst.w, inst.grams, cfg);
  for (const TraceStep& s : bs.trace.steps) CHECK(s.kind != StepKind::AlphaC);
  // And the schedule does fire when (t+1) mod k == 0.
  cfg.iters = 4;
  cfg.rel_tol = 0.0;  // run all four iterations
  const BlockSolve bs4 = solve_block(inst.w, inst.grams, cfg);
  int alpha_c_steps = 0;
  for (const TraceStep& s : bs4.trace.steps)
    alpha_c_steps += s.kind == StepKind::AlphaC ? 1 : 0;
  CHECK(alpha_c_steps == 1);  // t = 4 only
}

TEST_CASE("amp Off traces are non-increasing") {
  ts::TestRng r(63);
  for (int trial = 0; trial < 20; ++trial) {
    ts::Instance inst = ts::random_instance(r, 3 + trial % 10, 2 + trial % 7,
                                            6 + trial % 20);
    const AlignmentMode mode = ts::kAllModes[trial % 3];
    const BlockSolve bs =
        solve_block(inst.w, inst.grams, quick_cfg(mode, AmpPolicy::Off));
    double prev = std::numeric_limits<double>::infinity();
    for (const TraceStep& s : bs.trace.steps) {
      if (std::isfinite(prev))
        CHECK(s.objective <= prev + 1e-9 * (1.0 + std::abs(prev)));
      prev = s.objective;
    }
  }
}

TEST_CASE("trace length stays within T·(2 + b_rows)") {
  ts::TestRng r(64);
  ts::Instance inst = ts::random_instance(r, 8, 6, 12);
  SolverConfig cfg = quick_cfg(AlignmentMode::Output, AmpPolicy::Agreement, 7);
  cfg.rel_tol = 0.0;
  const BlockSolve bs = solve_block(inst.w, inst.grams, cfg);
  CHECK(bs.trace.steps.size() <=
        static_cast<std::size_t>(cfg.iters * (2 + cfg.b_rows_per_iter)));
  CHECK(bs.iterations == 7);
}

TEST_CASE("solve with d_out == g is identical to solve_block") {
  ts::TestRng r(65);
  ts::Instance inst = ts::random_instance(r, 6, 5, 10);
  SolverConfig cfg = quick_cfg(AlignmentMode::Output, AmpPolicy::Agreement);
  cfg.block_width = 5;
  const SolveResult res = solve(inst.w, inst.grams, cfg);
  REQUIRE(res.blocks.size() == 1);
  const BlockSolve direct = solve_block(inst.w, inst.grams, cfg);
  CHECK(res.blocks[0].fact.alpha_r == direct.fact.alpha_r);
  CHECK(res.blocks[0].fact.alpha_c == direct.fact.alpha_c);
  CHECK(res.blocks[0].fact.b == direct.fact.b);
}

TEST_CASE("solve partitions d_out = 2g+1 into widths g, g, 1") {
  ts::TestRng r(66);
  ts::Instance inst = ts::random_instance(r, 4, 9, 8);
  SolverConfig cfg = quick_cfg(AlignmentMode::Output, AmpPolicy::Off, 3);
  cfg.block_width = 4;
  const SolveResult res = solve(inst.w, inst.grams, cfg);
  REQUIRE(res.blocks.size() == 3);
  CHECK(res.blocks[0].col_begin == 0);
  CHECK(res.blocks[0].col_end == 4);
  CHECK(res.blocks[1].col_end == 8);
  CHECK(res.blocks[2].col_end == 9);
  CHECK(res.blocks[2].fact.d_out() == 1);
  CHECK(reconstruct_solution(res).cols == 9);
}

TEST_CASE("per-block objectives sum to the whole-matrix objective") {
  ts::TestRng r(67);
  ts::Instance inst = ts::random_instance(r, 6, 8, 12);
  SolverConfig cfg = quick_cfg(AlignmentMode::Output, AmpPolicy::Off, 6);
  cfg.block_width = 3;
  const SolveResult res = solve(inst.w, inst.grams, cfg);

  double block_sum = 0.0;
  for (const BlockSolve& bs : res.blocks)
    block_sum += bs.trace.steps.back().objective;

  // Assemble the block factorizations and evaluate the whole objective
  // directly on the data.
  const DenseMatrix w_hat = reconstruct_solution(res);
  const double whole = frobenius_norm_sq(
      subtract(matmul(inst.x, inst.w), matmul(inst.x_hat, w_hat)));
  CHECK(ts::close_rel(block_sum, whole, 1e-9));
}

TEST_CASE("bits_per_weight matches the documented formula") {
  CHECK(bits_per_weight(4096, 4096, 128, 16) == 1.12890625);
  CHECK(bits_per_weight(64, 32, 32, 0) == 1.0);
  // Halving g strictly increases the overhead term.
  CHECK(bits_per_weight(64, 64, 16, 16) > bits_per_weight(64, 64, 32, 16));
  CHECK_THROWS_AS(bits_per_weight(0, 4, 2, 16), std::invalid_argument);
}

TEST_CASE("identical inputs give bit-identical factorizations and traces") {
  ts::TestRng r(68);
  ts::Instance inst = ts::random_instance(r, 7, 6, 11);
  const SolverConfig cfg = quick_cfg(AlignmentMode::Output, AmpPolicy::Agreement);
  const SolveResult a = solve(inst.w, inst.grams, cfg);
  const SolveResult b = solve(inst.w, inst.grams, cfg);
  REQUIRE(a.blocks.size() == b.blocks.size());
  for (std::size_t i = 0; i < a.blocks.size(); ++i) {
    CHECK(a.blocks[i].fact.alpha_r == b.blocks[i].fact.alpha_r);
    CHECK(a.blocks[i].fact.alpha_c == b.blocks[i].fact.alpha_c);
    CHECK(a.blocks[i].fact.b == b.blocks[i].fact.b);
  }
  REQUIRE(a.trace.steps.size() == b.trace.steps.size());
  for (std::size_t i = 0; i < a.trace.steps.size(); ++i)
    CHECK(a.trace.steps[i].objective == b.trace.steps[i].objective);
}

TEST_CASE("re-running on its own output barely changes the objective") {
  ts::TestRng r(69);
  for (int trial = 0; trial < 5; ++trial) {
    ts::Instance inst = ts::random_instance(r, 6, 5, 10);
    SolverConfig cfg = quick_cfg(AlignmentMode::Output, AmpPolicy::Off, 15);
    cfg.rel_tol = 1e-6;
    const BlockSolve first = solve_block(inst.w, inst.grams, cfg);
    const double obj1 = objective(first.fact, inst.w, inst.grams, cfg.mode);
    const BlockSolve second = solve_block_from(first.fact, inst.w, inst.grams, cfg);
    const double obj2 = objective(second.fact, inst.w, inst.grams, cfg.mode);
    CHECK(std::abs(obj2 - obj1) < cfg.rel_tol * (1.0 + std::abs(obj1)));
  }
}

TEST_CASE("block solve order does not affect per-block results") {
  ts::TestRng r(70);
  ts::Instance inst = ts::random_instance(r, 5, 9, 9);
  SolverConfig cfg = quick_cfg(AlignmentMode::Output, AmpPolicy::Agreement, 6);
  cfg.block_width = 3;
  const SolveResult res = solve(inst.w, inst.grams, cfg);
  // Solve the blocks by hand in reverse order.
  for (std::size_t bi = res.blocks.size(); bi-- > 0;) {
    const BlockSolve& ref = res.blocks[bi];
    DenseMatrix wb(inst.w.rows, ref.col_end - ref.col_begin);
    for (std::size_t i = 0; i < wb.rows; ++i)
      for (std::size_t j = 0; j < wb.cols; ++j)
        wb(i, j) = inst.w(i, ref.col_begin + j);
    const BlockSolve redo = solve_block(wb, inst.grams, cfg, bi);
    CHECK(redo.fact.alpha_r == ref.fact.alpha_r);
    CHECK(redo.fact.alpha_c == ref.fact.alpha_c);
    CHECK(redo.fact.b == ref.fact.b);
  }
}

TEST_CASE("Off policy is bit-identical to a loop with no AMP code path") {
  ts::TestRng r(71);
  for (int trial = 0; trial < 10; ++trial) {
    ts::Instance inst = ts::random_instance(r, 6, 5, 9);
    const AlignmentMode mode = ts::kAllModes[trial % 3];
    SolverConfig cfg = quick_cfg(mode, AmpPolicy::Off);
    const BlockSolve bs = solve_block(inst.w, inst.grams, cfg);
    const BinaryFactorization plain = plain_loop(inst.w, inst.grams, cfg);
    CHECK(bs.fact.alpha_r == plain.alpha_r);
    CHECK(bs.fact.alpha_c == plain.alpha_c);
    CHECK(bs.fact.b == plain.b);
  }
}

TEST_CASE("amp Off acceptance ratios are all 1") {
  ts::TestRng r(72);
  ts::Instance inst = ts::random_instance(r, 5, 4, 8);
  const BlockSolve bs = solve_block(
      inst.w, inst.grams, quick_cfg(AlignmentMode::Output, AmpPolicy::Off));
  for (const TraceStep& s : bs.trace.steps) CHECK(s.accept_ratio == 1.0);
}

TEST_CASE("non-finite weights are rejected with the offending step named") {
  DenseMatrix w(2, 2, 1.0);
  w(0, 0) = std::nan("");
  const GramBundle empty;
  CHECK_THROWS_AS(
      solve_block(w, empty, quick_cfg(AlignmentMode::Weight, AmpPolicy::Off)),
      std::invalid_argument);
}

TEST_CASE("config validation names the offending field") {
  SolverConfig cfg;
  cfg.iters = 0;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("iters"),
                       std::invalid_argument);
  cfg = SolverConfig{};
  cfg.block_width = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("early exit respects rel_tol = 0 (fixed iteration count)") {
  ts::TestRng r(73);
  ts::Instance inst = ts::random_instance(r, 4, 3, 6);
  SolverConfig cfg = quick_cfg(AlignmentMode::Weight, AmpPolicy::Off, 12);
  cfg.rel_tol = 0.0;
  const BlockSolve bs = solve_block(inst.w, inst.grams, cfg);
  CHECK(bs.iterations == 12);
  cfg.rel_tol = 1e-6;
  const BlockSolve early = solve_block(inst.w, inst.grams, cfg);
  CHECK(early.iterations < 12);  // converges long before 12 iterations
}
