#include "binquant/factorization.hpp"

#include <cmath>
#include <stdexcept>

#include "binquant/kernels.hpp"

namespace binquant {

EffectiveGrams effective_grams(const GramBundle& g, AlignmentMode mode,
                               std::size_t d_in) {
  EffectiveGrams e;
  switch (mode) {
    case AlignmentMode::Weight:
      e.s = DenseMatrix::identity(d_in);
      e.s_hat = e.s;
      e.s_ff = e.s;
      return e;
    case AlignmentMode::ActivationConditioned:
      require_dims(g.dim() == d_in, "effective_grams");
      e.s = g.s_hat;
      e.s_hat = g.s_hat;
      e.s_ff = g.s_hat;
      return e;
    case AlignmentMode::Output:
      require_dims(g.dim() == d_in, "effective_grams");
      e.s = g.s;
      e.s_hat = g.s_hat;
      e.s_ff = g.s_ff;
      return e;
  }
  throw std::invalid_argument("unknown alignment mode");
}

DenseMatrix BinaryFactorization::reconstruct() const {
  DenseMatrix w(d_in(), d_out());
  for (std::size_t i = 0; i < d_in(); ++i)
    for (std::size_t j = 0; j < d_out(); ++j)
      w(i, j) = alpha_r[i] * b(i, j) * alpha_c[j];
  return w;
}

void BinaryFactorization::validate() const {
  require_dims(alpha_r.size() == b.rows && alpha_c.size() == b.cols,
               "factorization scales");
  for (double v : b.data)
    if (v != 1.0 && v != -1.0)
      throw std::invalid_argument("B entry is not exactly ±1");
  for (double v : alpha_r)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite alpha_r");
  for (double v : alpha_c)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite alpha_c");
}

BinaryFactorization init_factorization(const DenseMatrix& w) {
  BinaryFactorization f;
  f.b = DenseMatrix(w.rows, w.cols);
  for (std::size_t i = 0; i < w.data.size(); ++i)
    f.b.data[i] = w.data[i] < 0.0 ? -1.0 : 1.0;
  f.alpha_r.assign(w.rows, 1.0);
  f.alpha_c.assign(w.cols, 0.0);
  for (std::size_t j = 0; j < w.cols; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.rows; ++i) s += std::abs(w(i, j));
    f.alpha_c[j] = s / static_cast<double>(w.rows);
  }
  return f;
}

double objective(const BinaryFactorization& f, const DenseMatrix& w,
                 const GramBundle& grams, AlignmentMode mode) {
  require_dims(w.rows == f.d_in() && w.cols == f.d_out(), "objective");
  const EffectiveGrams e = effective_grams(grams, mode, w.rows);
  const DenseMatrix w_hat = f.reconstruct();
  const double t1 = frobenius_dot(matmul(e.s_ff, w), w);
  const double t2 = frobenius_dot(matmul(e.s, w), w_hat);
  const double t3 = frobenius_dot(matmul(e.s_hat, w_hat), w_hat);
  return t1 - 2.0 * t2 + t3;
}

ScaleProposal refine_alpha_c(const BinaryFactorization& f, const DenseMatrix& w,
                             const GramBundle& grams, AlignmentMode mode) {
  const EffectiveGrams e = effective_grams(grams, mode, w.rows);
  const DenseMatrix a = row_scale(f.alpha_r, f.b);  // diag(α_r)·B
  const std::vector<double> num = diag_of_atb(a, matmul(e.s, w));
  const std::vector<double> den = diag_of_atb(a, matmul(e.s_hat, a));

  double den_max = 0.0;
  for (double d : den) den_max = std::max(den_max, std::abs(d));
  const double cutoff = 1e-12 * den_max;

  ScaleProposal out;
  out.value = f.alpha_c;
  for (std::size_t j = 0; j < den.size(); ++j) {
    if (std::abs(den[j]) > cutoff && den[j] != 0.0)
      out.value[j] = num[j] / den[j];
    else
      ++out.fallback_count;
  }
  return out;
}

namespace {

// C = B·diag(α_c ⊙ α_c)·Bᵀ; bitwise symmetric because B is ±1.
DenseMatrix cross_pattern(const BinaryFactorization& f) {
  std::vector<double> ac2(f.alpha_c.size());
  for (std::size_t j = 0; j < ac2.size(); ++j) ac2[j] = f.alpha_c[j] * f.alpha_c[j];
  return matmul_a_bt(col_scale(f.b, ac2), f.b);
}

std::vector<double> alpha_r_rhs(const BinaryFactorization& f, const DenseMatrix& w,
                                const EffectiveGrams& e) {
  // Diag(S·W·diag(α_c)·Bᵀ)
  return diag_of_abt(col_scale(matmul(e.s, w), f.alpha_c), f.b);
}

}  // namespace

std::vector<double> refine_alpha_r(const BinaryFactorization& f,
                                   const DenseMatrix& w,
                                   const GramBundle& grams, AlignmentMode mode) {
  const EffectiveGrams e = effective_grams(grams, mode, w.rows);
  const DenseMatrix system = hadamard(e.s_hat, cross_pattern(f));
  return lstsq_solve(system, alpha_r_rhs(f, w, e));
}

RefinerWorkspace make_refiner_workspace(const BinaryFactorization& f,
                                        const DenseMatrix& w,
                                        const GramBundle& grams,
                                        AlignmentMode mode) {
  const EffectiveGrams e = effective_grams(grams, mode, w.rows);
  RefinerWorkspace ws;
  ws.n = sym_scale(e.s_hat, f.alpha_r);
  ws.n_f = ws.n;
  for (std::size_t i = 0; i < ws.n_f.rows; ++i) ws.n_f(i, i) = 0.0;
  ws.k_diag.resize(f.alpha_c.size());
  for (std::size_t j = 0; j < ws.k_diag.size(); ++j)
    ws.k_diag[j] = f.alpha_c[j] * f.alpha_c[j];
  ws.p = row_scale(f.alpha_r, col_scale(matmul(e.s, w), f.alpha_c));
  ws.c = cross_pattern(f);
  return ws;
}

RowScores refine_b_scores(const BinaryFactorization& f, const DenseMatrix& w,
                          const GramBundle& grams, AlignmentMode mode) {
  const RefinerWorkspace ws = make_refiner_workspace(f, w, grams, mode);
  const DenseMatrix nbk = col_scale(matmul(ws.n_f, f.b), ws.k_diag);

  RowScores out;
  out.scores = DenseMatrix(f.d_in(), f.d_out());
  for (std::size_t i = 0; i < out.scores.data.size(); ++i)
    out.scores.data[i] = 2.0 * nbk.data[i] - 2.0 * ws.p.data[i];

  out.row_index = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < f.d_in(); ++j) {
    double agree = 0.0;
    for (std::size_t k = 0; k < f.d_out(); ++k) agree += f.b(j, k) * out.scores(j, k);
    if (agree > best) {
      best = agree;
      out.row_index = j;
    }
  }
  return out;
}

std::vector<double> refine_b_row(const BinaryFactorization& f,
                                 std::size_t row_index,
                                 const DenseMatrix& scores) {
  require_dims(row_index < f.d_in() && scores.rows == f.d_in() &&
                   scores.cols == f.d_out(),
               "refine_b_row");
  std::vector<double> row(f.d_out());
  for (std::size_t k = 0; k < f.d_out(); ++k) {
    const double s = scores(row_index, k);
    row[k] = s == 0.0 ? f.b(row_index, k) : (s > 0.0 ? -1.0 : 1.0);
  }
  return row;
}

DenseMatrix refine_b_full_sweep(const BinaryFactorization& f,
                                const DenseMatrix& w, const GramBundle& grams,
                                AlignmentMode mode) {
  const RowScores rs = refine_b_scores(f, w, grams, mode);
  DenseMatrix b = f.b;
  for (std::size_t i = 0; i < f.d_in(); ++i) {
    const std::vector<double> row = refine_b_row(f, i, rs.scores);
    for (std::size_t k = 0; k < f.d_out(); ++k) b(i, k) = row[k];
  }
  return b;
}

std::vector<double> oracle_row_enumeration(const BinaryFactorization& f,
                                           const DenseMatrix& w,
                                           const GramBundle& grams,
                                           AlignmentMode mode,
                                           std::size_t row_index) {
  const std::size_t d = f.d_out();
  if (d > 16) throw std::invalid_argument("oracle_row_enumeration: d_out > 16");
  require_dims(row_index < f.d_in(), "oracle_row_enumeration");

  BinaryFactorization trial = f;
  std::vector<double> best;
  double best_obj = 0.0;
  // Increasing m enumerates rows in lexicographic order (−1 < +1), so the
  // first strict minimum is the lexicographically smallest tie.
  for (std::uint32_t m = 0; m < (1u << d); ++m) {
    for (std::size_t k = 0; k < d; ++k)
      trial.b(row_index, k) = (m >> (d - 1 - k)) & 1 ? 1.0 : -1.0;
    const double obj = objective(trial, w, grams, mode);
    if (best.empty() || obj < best_obj) {
      best_obj = obj;
      best.assign(&trial.b(row_index, 0), &trial.b(row_index, 0) + d);
    }
  }
  return best;
}

std::vector<double> objective_grad_alpha_r(const BinaryFactorization& f,
                                           const DenseMatrix& w,
                                           const GramBundle& grams,
                                           AlignmentMode mode) {
  const EffectiveGrams e = effective_grams(grams, mode, w.rows);
  const DenseMatrix system = hadamard(e.s_hat, cross_pattern(f));
  const std::vector<double> rhs = alpha_r_rhs(f, w, e);
  std::vector<double> g(f.d_in(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    double hx = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) hx += system(i, j) * f.alpha_r[j];
    g[i] = 2.0 * (hx - rhs[i]);
  }
  return g;
}

std::vector<double> objective_grad_alpha_c(const BinaryFactorization& f,
                                           const DenseMatrix& w,
                                           const GramBundle& grams,
                                           AlignmentMode mode) {
  const EffectiveGrams e = effective_grams(grams, mode, w.rows);
  const DenseMatrix a = row_scale(f.alpha_r, f.b);
  const std::vector<double> num = diag_of_atb(a, matmul(e.s, w));
  const std::vector<double> den = diag_of_atb(a, matmul(e.s_hat, a));
  std::vector<double> g(f.d_out(), 0.0);
  for (std::size_t j = 0; j < g.size(); ++j)
    g[j] = 2.0 * (den[j] * f.alpha_c[j] - num[j]);
  return g;
}

}  // namespace binquant
