#include "binquant/solver.hpp"

#include <cmath>
#include <stdexcept>

#include "binquant/threading.hpp"

namespace binquant {

void SolverConfig::validate() const {
  if (iters < 1) throw std::invalid_argument("config: iters must be >= 1");
  if (alpha_c_period < 1) throw std::invalid_argument("config: k must be >= 1");
  if (b_rows_per_iter < 1) throw std::invalid_argument("config: b_rows must be >= 1");
  if (block_width < 1) throw std::invalid_argument("config: block_size must be >= 1");
  if (rel_tol < 0) throw std::invalid_argument("config: rel_tol must be >= 0");
  if (scale_bits < 0) throw std::invalid_argument("config: scale_bits must be >= 0");
}

const char* step_kind_name(StepKind k) {
  switch (k) {
    case StepKind::AlphaR: return "alpha_r";
    case StepKind::AlphaC: return "alpha_c";
    case StepKind::BRow: return "b_row";
  }
  return "?";
}

namespace {

struct StepContext {
  const DenseMatrix& w;
  const GramBundle& grams;
  const SolverConfig& cfg;
  const DenseMatrix& m;  // AMP Gram for this block
  std::size_t block_index;
  BlockSolve& out;
};

double record_step(StepContext& ctx, const BinaryFactorization& f, StepKind kind,
                   int iter, double accept) {
  const double obj = objective(f, ctx.w, ctx.grams, ctx.cfg.mode);
  if (!std::isfinite(obj))
    throw std::runtime_error("non-finite objective after " +
                             std::string(step_kind_name(kind)) + " step, iteration " +
                             std::to_string(iter) + ", block " +
                             std::to_string(ctx.block_index));
  ctx.out.trace.steps.push_back(
      {kind, ctx.block_index, iter, obj, amp_objective(f, ctx.m), accept});
  return obj;
}

BlockSolve run_block(BinaryFactorization f, const DenseMatrix& w_block,
                     const GramBundle& grams, const SolverConfig& cfg,
                     std::size_t block_index) {
  cfg.validate();
  require_dims(w_block.rows == f.d_in() && w_block.cols == f.d_out(),
               "solve_block");
  if (!w_block.all_finite())
    throw std::invalid_argument("solve_block: non-finite weights");

  const EffectiveGrams e = effective_grams(grams, cfg.mode, w_block.rows);
  const DenseMatrix m = amp_gram(e.s, w_block);

  BlockSolve out;
  out.block_index = block_index;
  StepContext ctx{w_block, grams, cfg, m, block_index, out};

  double obj = objective(f, w_block, grams, cfg.mode);
  for (int t = 1; t <= cfg.iters; ++t) {
    const double iter_start = obj;

    {
      const std::vector<double> proposal = refine_alpha_r(f, w_block, grams, cfg.mode);
      const AmpMasks raw = amp_raw_masks(f, m);
      const auto sel = select_scales(raw.raw_r, proposal, f.alpha_r, cfg.amp_policy);
      masked_update_scales(f.alpha_r, proposal, sel);
      obj = record_step(ctx, f, StepKind::AlphaR, t, acceptance_ratio(sel));
    }

    if ((t + 1) % cfg.alpha_c_period == 0) {
      const ScaleProposal proposal = refine_alpha_c(f, w_block, grams, cfg.mode);
      out.alpha_c_fallbacks += proposal.fallback_count;
      const AmpMasks raw = amp_raw_masks(f, m);
      const auto sel = select_scales(raw.raw_c, proposal.value, f.alpha_c, cfg.amp_policy);
      masked_update_scales(f.alpha_c, proposal.value, sel);
      obj = record_step(ctx, f, StepKind::AlphaC, t, acceptance_ratio(sel));
    }

    for (int r = 0; r < cfg.b_rows_per_iter; ++r) {
      const RowScores rs = refine_b_scores(f, w_block, grams, cfg.mode);
      const std::vector<double> row = refine_b_row(f, rs.row_index, rs.scores);
      const AmpMasks raw = amp_raw_masks(f, m);
      const auto sel = select_b_row(raw.raw_b, rs.row_index, row, cfg.amp_policy);
      masked_update_b_row(f.b, rs.row_index, row, sel);
      obj = record_step(ctx, f, StepKind::BRow, t, acceptance_ratio(sel));
    }

    out.iterations = t;
    if (cfg.rel_tol > 0.0 &&
        (iter_start - obj) < cfg.rel_tol * std::max(std::abs(iter_start), 1e-30))
      break;
  }

  f.validate();
  out.fact = std::move(f);
  return out;
}

}  // namespace

BlockSolve solve_block(const DenseMatrix& w_block, const GramBundle& grams,
                       const SolverConfig& cfg, std::size_t block_index) {
  return run_block(init_factorization(w_block), w_block, grams, cfg, block_index);
}

BlockSolve solve_block_from(BinaryFactorization f, const DenseMatrix& w_block,
                            const GramBundle& grams, const SolverConfig& cfg,
                            std::size_t block_index) {
  f.validate();
  return run_block(std::move(f), w_block, grams, cfg, block_index);
}

SolveResult solve(const DenseMatrix& w, const GramBundle& grams,
                  const SolverConfig& cfg) {
  cfg.validate();
  SolveResult res;
  res.d_in = w.rows;
  res.d_out = w.cols;
  const std::size_t g = cfg.block_width;
  const std::size_t n_blocks = (w.cols + g - 1) / g;
  res.blocks.resize(n_blocks);

  std::exception_ptr err;
  const std::int64_t nb = static_cast<std::int64_t>(n_blocks);
#pragma omp parallel for schedule(dynamic) num_threads(worker_count()) if (worker_count() > 1 && nb > 1)
  for (std::int64_t bi = 0; bi < nb; ++bi) {
    try {
      const std::size_t c0 = static_cast<std::size_t>(bi) * g;
      const std::size_t c1 = std::min(c0 + g, w.cols);
      DenseMatrix wb(w.rows, c1 - c0);
      for (std::size_t i = 0; i < w.rows; ++i)
        for (std::size_t j = c0; j < c1; ++j) wb(i, j - c0) = w(i, j);
      BlockSolve bs = solve_block(wb, grams, cfg, static_cast<std::size_t>(bi));
      bs.col_begin = c0;
      bs.col_end = c1;
      res.blocks[bi] = std::move(bs);
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);

  for (const BlockSolve& bs : res.blocks)
    res.trace.steps.insert(res.trace.steps.end(), bs.trace.steps.begin(),
                           bs.trace.steps.end());
  return res;
}

DenseMatrix reconstruct_solution(const SolveResult& r) {
  DenseMatrix w(r.d_in, r.d_out);
  for (const BlockSolve& bs : r.blocks) {
    const DenseMatrix wb = bs.fact.reconstruct();
    for (std::size_t i = 0; i < wb.rows; ++i)
      for (std::size_t j = 0; j < wb.cols; ++j) w(i, bs.col_begin + j) = wb(i, j);
  }
  return w;
}

double bits_per_weight(std::size_t d_in, std::size_t d_out,
                       std::size_t block_width, int scale_bits) {
  if (d_in < 1 || d_out < 1 || block_width < 1)
    throw std::invalid_argument("bits_per_weight: dims must be >= 1");
  const double n_blocks = static_cast<double>((d_out + block_width - 1) / block_width);
  const double weights = static_cast<double>(d_in) * static_cast<double>(d_out);
  const double scales = n_blocks * static_cast<double>(d_in) + static_cast<double>(d_out);
  return (weights + static_cast<double>(scale_bits) * scales) / weights;
}

}  // namespace binquant
