#pragma once

#include <optional>
#include <string>
#include <vector>

#include "binquant/matrix.hpp"
#include "binquant/prng.hpp"
#include "binquant/solver.hpp"

namespace binquant {

enum class LayerRole { Query, Key, Value, AttnOut, FcUp, FinalFc, Plain };
enum class Nonlinearity { Identity, Relu };

const char* layer_role_name(LayerRole r);

struct LayerSpec {
  std::size_t d_in = 0;
  std::size_t d_out = 0;
  DenseMatrix weight;
  LayerRole role = LayerRole::Plain;
  std::optional<AlignmentMode> alignment;  // empty = inherit from role/config
  // synth_model only: draw a weight with rank-1 magnitude (exactly
  // representable by one factorization block) instead of i.i.d. normal.
  bool rank1_magnitude = false;
};

struct BlockSpec {
  std::vector<LayerSpec> layers;
  Nonlinearity nonlinearity = Nonlinearity::Identity;
  bool residual = false;
  bool row_normalize_output = false;
};

struct ModelSpec {
  std::vector<BlockSpec> blocks;
  // Deterministic Gaussian perturbation of the quantized-path activations
  // feeding every layer after the first; emulates accumulated error from
  // parts of the network outside the toy stack.
  double path_noise = 0.0;
  std::uint64_t noise_seed = 0;

  std::size_t layer_count() const;
  void validate() const;  // consecutive layer dims must chain
};

struct QuantizedLayer {
  std::size_t layer_index = 0;  // global, 0-based
  std::size_t block_index = 0;
  LayerRole role = LayerRole::Plain;
  AlignmentMode mode = AlignmentMode::Weight;
  DenseMatrix weight;
  DenseMatrix weight_hat;
  SolveResult solution;
  GramBundle grams;  // as accumulated for this layer
};

struct QuantizedModel {
  ModelSpec spec;
  std::vector<QuantizedLayer> layers;
};

// Quantizes layers front-to-back: each layer's Grams come from the current
// full-precision and quantized-path activations, so earlier quantization
// error is baked into X̂. final_fc layers take cfg.mode, everything else
// Weight alignment, unless the layer carries an explicit override.
QuantizedModel quantize_model(const ModelSpec& model, const DenseMatrix& x0,
                              const SolverConfig& cfg);

struct LayerRecord {
  DenseMatrix input;   // what the layer consumed (after any path noise)
  DenseMatrix preact;  // input · weight
  DenseMatrix output;  // after nonlinearity / residual / row normalization
};

struct PropagationRecord {
  std::vector<LayerRecord> layers;
  std::vector<DenseMatrix> block_outputs;
  DenseMatrix final_output;
};

PropagationRecord propagate(const QuantizedModel& qm, const DenseMatrix& x0,
                            bool use_quantized);

struct MetricRow {
  std::size_t layer;
  std::size_t block;
  std::string metric;
  double value;
};

// Per layer: weight_err, pseudo_err, true_err, actcond_err (Frobenius
// norms); per block: block_mse.
std::vector<MetricRow> error_metrics(const QuantizedModel& qm,
                                     const PropagationRecord& fp,
                                     const PropagationRecord& q);

// Per block: out_cos and actcond_cos, mean over rows of the per-row cosine
// at the block's last layer; zero rows contribute 0.
std::vector<MetricRow> cosine_metrics(const QuantizedModel& qm,
                                      const PropagationRecord& fp,
                                      const PropagationRecord& q);

// Row-normalizes XW, X̂W, X̂Ŵ per sample (zero rows stay zero), forms the
// token-similarity matrices and returns (Σ‖T_q−T_a‖_F, Σ‖T_q−T_o‖_F).
std::pair<double, double> token_similarity_error(const DenseMatrix& x,
                                                 const DenseMatrix& x_hat,
                                                 const DenseMatrix& w,
                                                 const DenseMatrix& w_hat,
                                                 std::size_t sample_len);

// tok_sim_act / tok_sim_out rows, one pair per block (last layer).
std::vector<MetricRow> token_metrics(const QuantizedModel& qm,
                                     const PropagationRecord& fp,
                                     const PropagationRecord& q,
                                     std::size_t sample_len);

double end_to_end_mse(const PropagationRecord& fp, const PropagationRecord& q);

// Toy-model construction with layer weights drawn from per-layer PRNG
// streams of `seed`.
ModelSpec synth_model(const std::vector<BlockSpec>& shape, std::uint64_t seed,
                      double path_noise);

}  // namespace binquant
