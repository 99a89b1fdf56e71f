#pragma once

#include <cstdint>

#include "binquant/matrix.hpp"

namespace binquant {

// Counter-based SplitMix64 generator with Box-Muller normals on
// fixed-order draws. Every value is a pure function of (seed, stream,
// index), so generation is random-access and reproducible. The exact
// construction is documented in the README.
struct CounterRng {
  std::uint64_t stream_seed;

  CounterRng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t bits(std::uint64_t index) const;
  double uniform(std::uint64_t index) const;  // in (0, 1]
  double normal(std::uint64_t index) const;   // standard normal
};

// Stream ids used across the project.
enum : std::uint64_t {
  kStreamWeight = 0,
  kStreamCalib = 1,
  kStreamCalibNoise = 2,
  kStreamLayerWeight = 16,    // + layer index
  kStreamPathNoise = 4096,    // + layer index
};

struct SynthInstance {
  DenseMatrix w;      // d_in × d_out
  DenseMatrix x;      // n × d_in, full-precision activations
  DenseMatrix x_hat;  // n × d_in, quantized-path activations
};

// W and X i.i.d. standard normal, X̂ = X + noise·ε. Pure function of the
// arguments; noise = 0 reproduces X bit-exactly.
SynthInstance synth_instance(std::uint64_t seed, std::size_t d_in,
                             std::size_t d_out, std::size_t n, double noise);

// Standard-normal matrix from one stream, filled in row-major order.
DenseMatrix normal_matrix(std::uint64_t seed, std::uint64_t stream,
                          std::size_t rows, std::size_t cols);

}  // namespace binquant
