#include "binquant/pipeline.hpp"

#include <cmath>
#include <stdexcept>

#include "binquant/kernels.hpp"

namespace binquant {

const char* layer_role_name(LayerRole r) {
  switch (r) {
    case LayerRole::Query: return "query";
    case LayerRole::Key: return "key";
    case LayerRole::Value: return "value";
    case LayerRole::AttnOut: return "attn_out";
    case LayerRole::FcUp: return "fc_up";
    case LayerRole::FinalFc: return "final_fc";
    case LayerRole::Plain: return "plain";
  }
  return "?";
}

std::size_t ModelSpec::layer_count() const {
  std::size_t n = 0;
  for (const BlockSpec& b : blocks) n += b.layers.size();
  return n;
}

void ModelSpec::validate() const {
  if (blocks.empty()) throw std::invalid_argument("model has no blocks");
  std::size_t prev = 0;
  bool first = true;
  for (const BlockSpec& b : blocks) {
    if (b.layers.empty()) throw std::invalid_argument("block has no layers");
    for (const LayerSpec& l : b.layers) {
      if (l.weight.rows != l.d_in || l.weight.cols != l.d_out)
        throw std::invalid_argument("layer weight shape does not match dims");
      if (!first && l.d_in != prev)
        throw std::invalid_argument("layer dims do not chain");
      prev = l.d_out;
      first = false;
    }
  }
}

namespace {

struct FlatLayer {
  const LayerSpec* spec;
  const BlockSpec* block;
  std::size_t block_index;
  bool last_in_block;
};

std::vector<FlatLayer> flatten(const ModelSpec& m) {
  std::vector<FlatLayer> out;
  for (std::size_t bi = 0; bi < m.blocks.size(); ++bi) {
    const BlockSpec& b = m.blocks[bi];
    for (std::size_t li = 0; li < b.layers.size(); ++li)
      out.push_back({&b.layers[li], &b, bi, li + 1 == b.layers.size()});
  }
  return out;
}

void row_normalize(DenseMatrix& m) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    double n2 = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) n2 += m(i, j) * m(i, j);
    if (n2 == 0.0) continue;
    const double inv = 1.0 / std::sqrt(n2);
    for (std::size_t j = 0; j < m.cols; ++j) m(i, j) *= inv;
  }
}

// One layer of the forward pass; row normalization only at block ends.
LayerRecord advance(const DenseMatrix& input, const DenseMatrix& weight,
                    const FlatLayer& fl) {
  LayerRecord rec;
  rec.input = input;
  rec.preact = matmul(input, weight);
  rec.output = rec.preact;
  if (fl.block->nonlinearity == Nonlinearity::Relu)
    for (double& v : rec.output.data) v = v > 0.0 ? v : 0.0;
  if (fl.block->residual && fl.spec->d_in == fl.spec->d_out)
    for (std::size_t i = 0; i < rec.output.data.size(); ++i)
      rec.output.data[i] += input.data[i];
  if (fl.last_in_block && fl.block->row_normalize_output)
    row_normalize(rec.output);
  return rec;
}

DenseMatrix path_noise_matrix(const ModelSpec& m, std::size_t layer_index,
                              std::size_t rows, std::size_t cols) {
  DenseMatrix noise = normal_matrix(m.noise_seed, kStreamPathNoise + layer_index,
                                    rows, cols);
  for (double& v : noise.data) v *= m.path_noise;
  return noise;
}

AlignmentMode layer_mode(const LayerSpec& l, const SolverConfig& cfg) {
  if (l.alignment) return *l.alignment;
  if (l.role == LayerRole::FinalFc) return cfg.mode;
  return AlignmentMode::Weight;
}

}  // namespace

QuantizedModel quantize_model(const ModelSpec& model, const DenseMatrix& x0,
                              const SolverConfig& cfg) {
  model.validate();
  const std::vector<FlatLayer> flat = flatten(model);
  require_dims(x0.cols == flat.front().spec->d_in, "calibration width");

  QuantizedModel qm;
  qm.spec = model;
  DenseMatrix x = x0;      // full-precision path
  DenseMatrix x_hat = x0;  // quantized path (equals x at layer 1)

  for (std::size_t li = 0; li < flat.size(); ++li) {
    const FlatLayer& fl = flat[li];
    QuantizedLayer ql;
    ql.layer_index = li;
    ql.block_index = fl.block_index;
    ql.role = fl.spec->role;
    ql.mode = layer_mode(*fl.spec, cfg);
    ql.weight = fl.spec->weight;
    ql.grams = grams_from_data(x, x_hat);

    SolverConfig layer_cfg = cfg;
    layer_cfg.mode = ql.mode;
    ql.solution = solve(ql.weight, ql.grams, layer_cfg);
    ql.weight_hat = reconstruct_solution(ql.solution);

    const LayerRecord fp = advance(x, ql.weight, fl);
    LayerRecord qr = advance(x_hat, ql.weight_hat, fl);
    x = fp.output;
    x_hat = qr.output;
    if (model.path_noise > 0.0 && li + 1 < flat.size()) {
      const DenseMatrix noise =
          path_noise_matrix(model, li, x_hat.rows, x_hat.cols);
      for (std::size_t i = 0; i < x_hat.data.size(); ++i)
        x_hat.data[i] += noise.data[i];
    }
    qm.layers.push_back(std::move(ql));
  }
  return qm;
}

PropagationRecord propagate(const QuantizedModel& qm, const DenseMatrix& x0,
                            bool use_quantized) {
  const std::vector<FlatLayer> flat = flatten(qm.spec);
  require_dims(flat.size() == qm.layers.size(), "propagate model");
  require_dims(x0.cols == flat.front().spec->d_in, "propagate width");

  PropagationRecord rec;
  DenseMatrix x = x0;
  for (std::size_t li = 0; li < flat.size(); ++li) {
    const DenseMatrix& w =
        use_quantized ? qm.layers[li].weight_hat : qm.layers[li].weight;
    LayerRecord lr = advance(x, w, flat[li]);
    x = lr.output;
    if (use_quantized && qm.spec.path_noise > 0.0 && li + 1 < flat.size()) {
      const DenseMatrix noise =
          path_noise_matrix(qm.spec, li, x.rows, x.cols);
      for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += noise.data[i];
    }
    if (flat[li].last_in_block) rec.block_outputs.push_back(lr.output);
    rec.layers.push_back(std::move(lr));
  }
  rec.final_output = rec.layers.back().output;
  return rec;
}

namespace {

double mse(const DenseMatrix& a, const DenseMatrix& b) {
  const DenseMatrix d = subtract(a, b);
  return frobenius_norm_sq(d) / static_cast<double>(d.size());
}

double mean_row_cosine(const DenseMatrix& a, const DenseMatrix& b) {
  require_dims(a.rows == b.rows && a.cols == b.cols, "mean_row_cosine");
  double total = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i) {
    double aa = 0.0, bb = 0.0, ab = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) {
      aa += a(i, j) * a(i, j);
      bb += b(i, j) * b(i, j);
      ab += a(i, j) * b(i, j);
    }
    if (aa > 0.0 && bb > 0.0) total += ab / std::sqrt(aa * bb);
  }
  return total / static_cast<double>(a.rows);
}

std::vector<std::size_t> block_last_layers(const QuantizedModel& qm) {
  std::vector<std::size_t> out;
  const std::vector<FlatLayer> flat = flatten(qm.spec);
  for (std::size_t li = 0; li < flat.size(); ++li)
    if (flat[li].last_in_block) out.push_back(li);
  return out;
}

}  // namespace

std::vector<MetricRow> error_metrics(const QuantizedModel& qm,
                                     const PropagationRecord& fp,
                                     const PropagationRecord& q) {
  std::vector<MetricRow> rows;
  for (std::size_t li = 0; li < qm.layers.size(); ++li) {
    const QuantizedLayer& ql = qm.layers[li];
    const DenseMatrix& x = fp.layers[li].input;
    const DenseMatrix& x_hat = q.layers[li].input;
    const double weight_err =
        std::sqrt(frobenius_norm_sq(subtract(ql.weight, ql.weight_hat)));
    const double pseudo_err = std::sqrt(frobenius_norm_sq(
        subtract(fp.layers[li].preact, matmul(x, ql.weight_hat))));
    const double true_err = std::sqrt(
        frobenius_norm_sq(subtract(fp.layers[li].preact, q.layers[li].preact)));
    const double actcond_err = std::sqrt(frobenius_norm_sq(
        subtract(matmul(x_hat, ql.weight), q.layers[li].preact)));
    rows.push_back({li, ql.block_index, "weight_err", weight_err});
    rows.push_back({li, ql.block_index, "pseudo_err", pseudo_err});
    rows.push_back({li, ql.block_index, "true_err", true_err});
    rows.push_back({li, ql.block_index, "actcond_err", actcond_err});
  }
  const std::vector<std::size_t> last = block_last_layers(qm);
  for (std::size_t bi = 0; bi < last.size(); ++bi)
    rows.push_back({last[bi], bi, "block_mse",
                    mse(fp.block_outputs[bi], q.block_outputs[bi])});
  return rows;
}

std::vector<MetricRow> cosine_metrics(const QuantizedModel& qm,
                                      const PropagationRecord& fp,
                                      const PropagationRecord& q) {
  std::vector<MetricRow> rows;
  const std::vector<std::size_t> last = block_last_layers(qm);
  for (std::size_t bi = 0; bi < last.size(); ++bi) {
    const std::size_t li = last[bi];
    const DenseMatrix& z = fp.layers[li].preact;     // XW
    const DenseMatrix& z_hat = q.layers[li].preact;  // X̂Ŵ
    const DenseMatrix mixed = matmul(q.layers[li].input, qm.layers[li].weight);
    rows.push_back({li, bi, "out_cos", mean_row_cosine(z, z_hat)});
    rows.push_back({li, bi, "actcond_cos", mean_row_cosine(mixed, z_hat)});
  }
  return rows;
}

std::pair<double, double> token_similarity_error(const DenseMatrix& x,
                                                 const DenseMatrix& x_hat,
                                                 const DenseMatrix& w,
                                                 const DenseMatrix& w_hat,
                                                 std::size_t sample_len) {
  require_dims(sample_len >= 1 && x.rows % sample_len == 0,
               "token_similarity_error sample length");
  DenseMatrix q = matmul(x_hat, w_hat);
  DenseMatrix a = matmul(x_hat, w);
  DenseMatrix o = matmul(x, w);
  row_normalize(q);
  row_normalize(a);
  row_normalize(o);

  const std::size_t n_samples = x.rows / sample_len;
  double err_act = 0.0, err_out = 0.0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    DenseMatrix qs(sample_len, q.cols), as(sample_len, a.cols), os(sample_len, o.cols);
    for (std::size_t i = 0; i < sample_len; ++i)
      for (std::size_t j = 0; j < q.cols; ++j) {
        qs(i, j) = q(s * sample_len + i, j);
        as(i, j) = a(s * sample_len + i, j);
        os(i, j) = o(s * sample_len + i, j);
      }
    const DenseMatrix tq = matmul_a_bt(qs, qs);
    const DenseMatrix ta = matmul_a_bt(as, as);
    const DenseMatrix to = matmul_a_bt(os, os);
    err_act += std::sqrt(frobenius_norm_sq(subtract(tq, ta)));
    err_out += std::sqrt(frobenius_norm_sq(subtract(tq, to)));
  }
  return {err_act, err_out};
}

std::vector<MetricRow> token_metrics(const QuantizedModel& qm,
                                     const PropagationRecord& fp,
                                     const PropagationRecord& q,
                                     std::size_t sample_len) {
  std::vector<MetricRow> rows;
  const std::vector<std::size_t> last = block_last_layers(qm);
  for (std::size_t bi = 0; bi < last.size(); ++bi) {
    const std::size_t li = last[bi];
    const auto [act, out] =
        token_similarity_error(fp.layers[li].input, q.layers[li].input,
                               qm.layers[li].weight, qm.layers[li].weight_hat,
                               sample_len);
    rows.push_back({li, bi, "tok_sim_act", act});
    rows.push_back({li, bi, "tok_sim_out", out});
  }
  return rows;
}

double end_to_end_mse(const PropagationRecord& fp, const PropagationRecord& q) {
  return mse(fp.final_output, q.final_output);
}

ModelSpec synth_model(const std::vector<BlockSpec>& shape, std::uint64_t seed,
                      double path_noise) {
  ModelSpec m;
  m.blocks = shape;
  m.path_noise = path_noise;
  m.noise_seed = seed;
  std::size_t li = 0;
  for (BlockSpec& b : m.blocks)
    for (LayerSpec& l : b.layers) {
      if (l.rank1_magnitude) {
        const CounterRng rng(seed, kStreamLayerWeight + li);
        std::uint64_t at = 0;
        std::vector<double> rows(l.d_in), cols(l.d_out);
        for (double& v : rows) v = 0.25 + std::abs(rng.normal(at++));
        for (double& v : cols) v = 0.25 + std::abs(rng.normal(at++));
        l.weight = DenseMatrix(l.d_in, l.d_out);
        for (std::size_t i = 0; i < l.d_in; ++i)
          for (std::size_t j = 0; j < l.d_out; ++j)
            l.weight(i, j) =
                rows[i] * cols[j] * (rng.normal(at++) < 0 ? -1.0 : 1.0);
      } else {
        l.weight = normal_matrix(seed, kStreamLayerWeight + li, l.d_in, l.d_out);
      }
      ++li;
    }
  m.validate();
  return m;
}

}  // namespace binquant
