#include "binquant/prng.hpp"

#include <cmath>
#include <stdexcept>

namespace binquant {

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
constexpr double kTwoPi = 6.283185307179586476925286766559;

inline std::uint64_t mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : stream_seed(mix64(seed ^ (kGamma * (stream + 1)))) {}

std::uint64_t CounterRng::bits(std::uint64_t index) const {
  return mix64(stream_seed + (index + 1) * kGamma);
}

double CounterRng::uniform(std::uint64_t index) const {
  // 53 high bits, shifted into (0, 1] so log() below is always finite.
  return static_cast<double>((bits(index) >> 11) + 1) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t index) const {
  const std::uint64_t pair = index >> 1;
  const double u1 = uniform(2 * pair);
  const double u2 = uniform(2 * pair + 1);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = kTwoPi * u2;
  return (index & 1) == 0 ? r * std::cos(theta) : r * std::sin(theta);
}

DenseMatrix normal_matrix(std::uint64_t seed, std::uint64_t stream,
                          std::size_t rows, std::size_t cols) {
  CounterRng rng(seed, stream);
  DenseMatrix m(rows, cols);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = rng.normal(i);
  return m;
}

SynthInstance synth_instance(std::uint64_t seed, std::size_t d_in,
                             std::size_t d_out, std::size_t n, double noise) {
  if (d_in < 1 || d_out < 1 || n < 1)
    throw std::invalid_argument("synth_instance: dims must be >= 1");
  if (!(noise >= 0.0))
    throw std::invalid_argument("synth_instance: noise must be >= 0");
  SynthInstance out;
  out.w = normal_matrix(seed, kStreamWeight, d_in, d_out);
  out.x = normal_matrix(seed, kStreamCalib, n, d_in);
  out.x_hat = out.x;
  if (noise > 0.0) {
    CounterRng rng(seed, kStreamCalibNoise);
    for (std::size_t i = 0; i < out.x_hat.data.size(); ++i)
      out.x_hat.data[i] += noise * rng.normal(i);
  }
  return out;
}

}  // namespace binquant
