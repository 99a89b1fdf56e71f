#include "binquant/tensor_file.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

namespace binquant {

namespace {

constexpr char kMagic[4] = {'B', 'Q', 'T', '1'};

void put_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

std::size_t elem_size(Dtype d) {
  switch (d) {
    case Dtype::F32: return 4;
    case Dtype::F64: return 8;
    case Dtype::I8Sign: return 1;
  }
  return 0;
}

}  // namespace

std::uint64_t Tensor::element_count() const {
  std::uint64_t n = 1;
  for (std::uint64_t d : shape) {
    if (d != 0 && n > std::numeric_limits<std::uint64_t>::max() / d)
      throw TensorIoError(TensorIoError::Kind::BadValue, 0,
                          "tensor shape overflows element count");
    n *= d;
  }
  return n;
}

void Tensor::validate() const {
  if (element_count() != values.size())
    throw TensorIoError(TensorIoError::Kind::BadValue, 0,
                        "declared element count does not match data");
  if (dtype == Dtype::I8Sign) {
    for (double v : values)
      if (v != 1.0 && v != -1.0)
        throw TensorIoError(TensorIoError::Kind::BadValue, 0,
                            "i8-sign tensor contains a value other than ±1");
  }
}

void write_tensor(const std::string& path, const Tensor& t) {
  t.validate();
  std::string buf;
  buf.reserve(6 + 8 * t.shape.size() + elem_size(t.dtype) * t.values.size());
  buf.append(kMagic, 4);
  buf.push_back(static_cast<char>(t.dtype));
  if (t.shape.size() > 255)
    throw TensorIoError(TensorIoError::Kind::BadValue, 5, "rank exceeds 255");
  buf.push_back(static_cast<char>(t.shape.size()));
  for (std::uint64_t d : t.shape) put_u64_le(buf, d);
  switch (t.dtype) {
    case Dtype::F32:
      for (double v : t.values) {
        const std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
      }
      break;
    case Dtype::F64:
      for (double v : t.values) {
        const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
        put_u64_le(buf, bits);
      }
      break;
    case Dtype::I8Sign:
      for (double v : t.values) buf.push_back(v > 0 ? 1 : -1);
      break;
    default:
      throw TensorIoError(TensorIoError::Kind::BadDtype, 4, "unsupported dtype");
  }
  write_file_atomic(path, buf);
}

Tensor read_tensor(const std::string& path) {
  const std::string buf = read_file(path);
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
  const std::uint64_t size = buf.size();

  if (size < 4 || std::memcmp(buf.data(), kMagic, 4) != 0)
    throw TensorIoError(TensorIoError::Kind::BadMagic, 0,
                        path + ": bad magic at offset 0");
  if (size < 6)
    throw TensorIoError(TensorIoError::Kind::Truncated, size,
                        path + ": truncated header at offset " + std::to_string(size));
  const std::uint8_t code = p[4];
  if (code > 2)
    throw TensorIoError(TensorIoError::Kind::BadDtype, 4,
                        path + ": dtype code " + std::to_string(code) + " at offset 4");
  Tensor t;
  t.dtype = static_cast<Dtype>(code);
  const std::size_t rank = p[5];

  std::uint64_t off = 6;
  if (size < off + 8ull * rank)
    throw TensorIoError(TensorIoError::Kind::Truncated, size,
                        path + ": truncated shape at offset " + std::to_string(size));
  t.shape.resize(rank);
  for (std::size_t i = 0; i < rank; ++i, off += 8) t.shape[i] = get_u64_le(p + off);

  const std::uint64_t count = t.element_count();
  const std::uint64_t need = off + count * elem_size(t.dtype);
  if (size < need)
    throw TensorIoError(TensorIoError::Kind::Truncated, size,
                        path + ": payload ends at offset " + std::to_string(size) +
                            ", expected " + std::to_string(need) + " bytes");
  if (size > need)
    throw TensorIoError(TensorIoError::Kind::Truncated, need,
                        path + ": trailing bytes after offset " + std::to_string(need));

  t.values.resize(count);
  switch (t.dtype) {
    case Dtype::F32:
      for (std::uint64_t i = 0; i < count; ++i, off += 4) {
        std::uint32_t bits = 0;
        for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(p[off + k]) << (8 * k);
        t.values[i] = static_cast<double>(std::bit_cast<float>(bits));
      }
      break;
    case Dtype::F64:
      for (std::uint64_t i = 0; i < count; ++i, off += 8)
        t.values[i] = std::bit_cast<double>(get_u64_le(p + off));
      break;
    case Dtype::I8Sign:
      for (std::uint64_t i = 0; i < count; ++i, off += 1) {
        const signed char v = static_cast<signed char>(p[off]);
        if (v != 1 && v != -1)
          throw TensorIoError(TensorIoError::Kind::BadValue, off,
                              path + ": i8-sign byte " + std::to_string(int(v)) +
                                  " at offset " + std::to_string(off));
        t.values[i] = static_cast<double>(v);
      }
      break;
  }
  return t;
}

Tensor tensor_from_matrix(const DenseMatrix& m, Dtype dtype) {
  Tensor t;
  t.dtype = dtype;
  t.shape = {m.rows, m.cols};
  t.values = m.data;
  return t;
}

DenseMatrix matrix_from_tensor(const Tensor& t) {
  if (t.shape.size() != 2)
    throw TensorIoError(TensorIoError::Kind::BadValue, 0,
                        "expected a rank-2 tensor, got rank " + std::to_string(t.shape.size()));
  DenseMatrix m(static_cast<std::size_t>(t.shape[0]), static_cast<std::size_t>(t.shape[1]));
  m.data = t.values;
  return m;
}

Tensor tensor_from_vector(const std::vector<double>& v, Dtype dtype) {
  Tensor t;
  t.dtype = dtype;
  t.shape = {v.size()};
  t.values = v;
  return t;
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f)
      throw TensorIoError(TensorIoError::Kind::Io, 0, "cannot open " + tmp + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f)
      throw TensorIoError(TensorIoError::Kind::Io, 0, "short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw TensorIoError(TensorIoError::Kind::Io, 0, "cannot rename " + tmp + " to " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f)
    throw TensorIoError(TensorIoError::Kind::Io, 0, "cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return bytes;
}

}  // namespace binquant
