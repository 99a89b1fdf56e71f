#include "binquant/gram.hpp"

#include "binquant/kernels.hpp"

namespace binquant {

GramBundle make_gram_bundle(std::size_t d_in) {
  GramBundle g;
  g.s = DenseMatrix(d_in, d_in, 0.0);
  g.s_hat = DenseMatrix(d_in, d_in, 0.0);
  g.s_ff = DenseMatrix(d_in, d_in, 0.0);
  return g;
}

void gram_accumulate(GramBundle& acc, const DenseMatrix& x_fp,
                     const DenseMatrix& x_q) {
  require_dims(x_fp.rows == x_q.rows && x_fp.rows >= 1, "gram batch rows");
  require_dims(x_fp.cols == acc.dim() && x_q.cols == acc.dim(), "gram width");
  const DenseMatrix s = matmul_at_b(x_q, x_fp);
  const DenseMatrix sh = matmul_at_b(x_q, x_q);
  const DenseMatrix sff = matmul_at_b(x_fp, x_fp);
  for (std::size_t i = 0; i < acc.s.data.size(); ++i) {
    acc.s.data[i] += s.data[i];
    acc.s_hat.data[i] += sh.data[i];
    acc.s_ff.data[i] += sff.data[i];
  }
  acc.n_samples += x_fp.rows;
}

GramBundle grams_from_data(const DenseMatrix& x_fp, const DenseMatrix& x_q) {
  GramBundle g = make_gram_bundle(x_fp.cols);
  gram_accumulate(g, x_fp, x_q);
  return g;
}

DenseMatrix amp_gram(const DenseMatrix& s, const DenseMatrix& w) {
  require_dims(s.rows == s.cols && s.cols == w.rows, "amp_gram");
  const DenseMatrix sw = matmul(s, w);
  DenseMatrix m = matmul_a_bt(sw, sw);
  // Kill rounding asymmetry; downstream formulas assume M = Mᵀ.
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = i + 1; j < m.cols; ++j) {
      const double v = 0.5 * (m(i, j) + m(j, i));
      m(i, j) = v;
      m(j, i) = v;
    }
  return m;
}

}  // namespace binquant
