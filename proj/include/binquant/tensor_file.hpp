#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "binquant/matrix.hpp"

namespace binquant {

// BQT1 tensor files (all integers little-endian):
//
//   bytes 0..3   magic "BQT1"
//   byte  4      dtype code: 0 = f32, 1 = f64, 2 = i8-sign
//   byte  5      rank
//   then rank × 8-byte unsigned dimensions
//   then row-major payload (IEEE-754 f32/f64, or signed bytes ±1)

enum class Dtype : std::uint8_t { F32 = 0, F64 = 1, I8Sign = 2 };

struct Tensor {
  Dtype dtype = Dtype::F64;
  std::vector<std::uint64_t> shape;
  std::vector<double> values;  // row-major; i8-sign entries are exactly ±1

  std::uint64_t element_count() const;
  void validate() const;
};

struct TensorIoError : std::runtime_error {
  enum class Kind { BadMagic, Truncated, BadDtype, BadValue, Io };
  Kind kind;
  std::uint64_t offset;

  TensorIoError(Kind k, std::uint64_t off, const std::string& msg)
      : std::runtime_error(msg), kind(k), offset(off) {}
};

void write_tensor(const std::string& path, const Tensor& t);
Tensor read_tensor(const std::string& path);

Tensor tensor_from_matrix(const DenseMatrix& m, Dtype dtype = Dtype::F64);
DenseMatrix matrix_from_tensor(const Tensor& t);
Tensor tensor_from_vector(const std::vector<double>& v, Dtype dtype = Dtype::F64);

// Whole-file helpers. Writes go through a temp file + rename.
void write_file_atomic(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

}  // namespace binquant
