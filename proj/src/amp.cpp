#include "binquant/amp.hpp"

#include <stdexcept>

#include "binquant/kernels.hpp"

namespace binquant {

namespace {

inline std::int8_t sgn8(double x) {
  return x > 0.0 ? 1 : (x < 0.0 ? std::int8_t(-1) : std::int8_t(0));
}

DenseMatrix m_w_hat(const BinaryFactorization& f, const DenseMatrix& m) {
  require_dims(m.rows == m.cols && m.rows == f.d_in(), "amp gram shape");
  return matmul(m, f.reconstruct());
}

}  // namespace

double amp_objective(const BinaryFactorization& f, const DenseMatrix& m) {
  return frobenius_dot(m_w_hat(f, m), f.reconstruct());
}

DenseMatrix amp_grad_b(const BinaryFactorization& f, const DenseMatrix& m) {
  // 2·diag(α_r)·M·Ŵ·diag(α_c)
  DenseMatrix g = row_scale(f.alpha_r, col_scale(m_w_hat(f, m), f.alpha_c));
  for (double& v : g.data) v *= 2.0;
  return g;
}

std::vector<double> amp_grad_alpha_r(const BinaryFactorization& f,
                                     const DenseMatrix& m) {
  // 2·Diag(M·Ŵ·diag(α_c)·Bᵀ)
  std::vector<double> g = diag_of_abt(col_scale(m_w_hat(f, m), f.alpha_c), f.b);
  for (double& v : g) v *= 2.0;
  return g;
}

std::vector<double> amp_grad_alpha_c(const BinaryFactorization& f,
                                     const DenseMatrix& m) {
  // 2·Diag(Bᵀ·diag(α_r)·M·Ŵ)
  std::vector<double> g = diag_of_atb(f.b, row_scale(f.alpha_r, m_w_hat(f, m)));
  for (double& v : g) v *= 2.0;
  return g;
}

AmpMasks amp_raw_masks(const BinaryFactorization& f, const DenseMatrix& m) {
  AmpMasks out;
  const DenseMatrix gb = amp_grad_b(f, m);
  out.raw_b = DenseMatrix(gb.rows, gb.cols);
  for (std::size_t i = 0; i < gb.data.size(); ++i)
    out.raw_b.data[i] = static_cast<double>(sgn8(gb.data[i]));

  const std::vector<double> gr = amp_grad_alpha_r(f, m);
  out.raw_r.resize(gr.size());
  for (std::size_t i = 0; i < gr.size(); ++i) out.raw_r[i] = sgn8(gr[i]);

  const std::vector<double> gc = amp_grad_alpha_c(f, m);
  out.raw_c.resize(gc.size());
  for (std::size_t i = 0; i < gc.size(); ++i) out.raw_c[i] = sgn8(gc[i]);
  return out;
}

std::vector<std::uint8_t> select_scales(const std::vector<std::int8_t>& raw,
                                        const std::vector<double>& proposed,
                                        const std::vector<double>& current,
                                        AmpPolicy policy) {
  require_dims(raw.size() == proposed.size() && raw.size() == current.size(),
               "select_scales");
  std::vector<std::uint8_t> sel(raw.size(), 1);
  switch (policy) {
    case AmpPolicy::Off:
      return sel;
    case AmpPolicy::Agreement:
      for (std::size_t i = 0; i < raw.size(); ++i) {
        const int move = sign_of(proposed[i] - current[i]);
        sel[i] = (move == 0 || raw[i] == 0 || move == raw[i]) ? 1 : 0;
      }
      return sel;
    case AmpPolicy::Heaviside:
      for (std::size_t i = 0; i < raw.size(); ++i) sel[i] = raw[i] >= 0 ? 1 : 0;
      return sel;
  }
  throw std::invalid_argument("unknown AMP policy");
}

std::vector<std::uint8_t> select_b_row(const DenseMatrix& raw_b,
                                       std::size_t row_index,
                                       const std::vector<double>& proposed_row,
                                       AmpPolicy policy) {
  require_dims(row_index < raw_b.rows && proposed_row.size() == raw_b.cols,
               "select_b_row");
  std::vector<std::uint8_t> sel(proposed_row.size(), 1);
  switch (policy) {
    case AmpPolicy::Off:
      return sel;
    case AmpPolicy::Agreement:
      for (std::size_t k = 0; k < sel.size(); ++k) {
        const double raw = raw_b(row_index, k);
        sel[k] = (raw == 0.0 || raw == proposed_row[k]) ? 1 : 0;
      }
      return sel;
    case AmpPolicy::Heaviside:
      for (std::size_t k = 0; k < sel.size(); ++k)
        sel[k] = raw_b(row_index, k) >= 0.0 ? 1 : 0;
      return sel;
  }
  throw std::invalid_argument("unknown AMP policy");
}

void masked_update_scales(std::vector<double>& target,
                          const std::vector<double>& proposed,
                          const std::vector<std::uint8_t>& selectors) {
  require_dims(target.size() == proposed.size() && target.size() == selectors.size(),
               "masked_update_scales");
  for (std::size_t i = 0; i < target.size(); ++i)
    if (selectors[i]) target[i] = proposed[i];
}

void masked_update_b_row(DenseMatrix& b, std::size_t row_index,
                         const std::vector<double>& proposed_row,
                         const std::vector<std::uint8_t>& selectors) {
  require_dims(row_index < b.rows && proposed_row.size() == b.cols &&
                   selectors.size() == b.cols,
               "masked_update_b_row");
  for (std::size_t k = 0; k < b.cols; ++k)
    if (selectors[k]) b(row_index, k) = proposed_row[k];
}

double acceptance_ratio(const std::vector<std::uint8_t>& selectors) {
  if (selectors.empty()) return 1.0;
  std::size_t on = 0;
  for (std::uint8_t s : selectors) on += s;
  return static_cast<double>(on) / static_cast<double>(selectors.size());
}

}  // namespace binquant
