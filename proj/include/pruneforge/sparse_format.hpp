// Sparse matrix storage: the bit-mask representation (1 presence bit per
// element) and CSR(C) (a small fixed-width count of zeros preceding each
// stored value), plus byte-exact footprint accounting for whole models.
#pragma once

#include <bit>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pruneforge/common.hpp"
#include "pruneforge/tensor.hpp"

namespace pruneforge {

// An element is "zero" iff its bit pattern is +0.0. Classifying by bit
// pattern (rather than v == 0) keeps round-trips bitwise exact for -0.0.
template <typename T>
bool is_stored_zero(T v) {
  if constexpr (std::same_as<T, float>)
    return std::bit_cast<uint32_t>(v) == 0u;
  else
    return std::bit_cast<uint64_t>(v) == 0ull;
}

// Presence bit i of byte j marks element 8j+i (row-major flat order);
// nonzeros holds the present values in the same order.
template <typename T>
struct BitmaskMatrix {
  int64_t rows = 0;
  int64_t cols = 0;
  BitArray presence;
  std::vector<T> nonzeros;

  int64_t numel() const { return rows * cols; }
};

// Flat row-major stream of (count, value) entries: count zeros, then the
// value. Zero-runs longer than 2^count_bits - 1 are bridged with explicit
// zero-valued padding entries, including a terminal run of trailing zeros.
template <typename T>
struct CsrcMatrix {
  int64_t rows = 0;
  int64_t cols = 0;
  int count_bits = 4;
  std::vector<uint8_t> counts;  // one per entry, < 2^count_bits
  std::vector<T> values;        // same length; 0.0 marks a padding entry

  int64_t numel() const { return rows * cols; }
  int64_t entry_count() const { return int64_t(values.size()); }
  int64_t padding_entries() const {
    int64_t n = 0;
    for (const T& v : values)
      if (is_stored_zero(v)) ++n;
    return n;
  }
};

template <typename T>
BitmaskMatrix<T> encode_bitmask(const Tensor<T>& dense) {
  require_2d(dense, "encode_bitmask");
  BitmaskMatrix<T> m;
  m.rows = dense.rows();
  m.cols = dense.cols();
  m.presence = BitArray(m.numel(), false);
  const T* p = dense.data();
  for (int64_t i = 0; i < m.numel(); ++i) {
    if (!is_stored_zero(p[i])) {
      m.presence.set(i, true);
      m.nonzeros.push_back(p[i]);
    }
  }
  return m;
}

template <typename T>
Tensor<T> decode_bitmask(const BitmaskMatrix<T>& m) {
  Tensor<T> dense({m.rows, m.cols});
  T* p = dense.data();
  size_t k = 0;
  for (int64_t i = 0; i < m.numel(); ++i) {
    if (m.presence.get(i)) {
      if (k >= m.nonzeros.size()) throw IoError("bitmask matrix: presence bits exceed stored values");
      p[i] = m.nonzeros[k++];
    }
  }
  if (k != m.nonzeros.size()) throw IoError("bitmask matrix: stored values exceed presence bits");
  return dense;
}

template <typename T>
CsrcMatrix<T> encode_csrc(const Tensor<T>& dense, int count_bits = 4) {
  require_2d(dense, "encode_csrc");
  if (count_bits != 4 && count_bits != 5)
    throw ParamError("encode_csrc: count_bits must be 4 or 5, got " + std::to_string(count_bits));
  CsrcMatrix<T> m;
  m.rows = dense.rows();
  m.cols = dense.cols();
  m.count_bits = count_bits;
  const int64_t max_count = (int64_t(1) << count_bits) - 1;
  const T* p = dense.data();
  int64_t run = 0;
  auto emit = [&](int64_t count, T value) {
    m.counts.push_back(uint8_t(count));
    m.values.push_back(value);
  };
  for (int64_t i = 0; i < m.numel(); ++i) {
    if (is_stored_zero(p[i])) {
      ++run;
      continue;
    }
    while (run > max_count) {
      emit(max_count, T(0));  // padding entry covers max_count zeros + its own slot
      run -= max_count + 1;
    }
    emit(run, p[i]);
    run = 0;
  }
  while (run > 0) {  // trailing zero-run gets terminal padding entries
    if (run > max_count) {
      emit(max_count, T(0));
      run -= max_count + 1;
    } else {
      emit(run - 1, T(0));
      run = 0;
    }
  }
  return m;
}

template <typename T>
Tensor<T> decode_csrc(const CsrcMatrix<T>& m) {
  Tensor<T> dense({m.rows, m.cols});
  T* p = dense.data();
  int64_t pos = 0;
  for (size_t e = 0; e < m.values.size(); ++e) {
    pos += m.counts[e];
    if (pos >= m.numel()) throw IoError("csrc matrix: entries overrun the dense extent");
    p[pos++] = m.values[e];
  }
  // The encoder covers trailing zeros with terminal padding, so a
  // well-formed stream accounts for every element.
  if (pos != m.numel())
    throw IoError("csrc matrix: entries cover " + std::to_string(pos) + " of " + std::to_string(m.numel()) +
                  " elements");
  return dense;
}

// y = M x against the encoded form directly; column index ascends within each
// row, so the summation order matches the dense kernel.
template <typename T>
Tensor<T> spmv(const BitmaskMatrix<T>& m, const Tensor<T>& x) {
  if (x.numel() != m.cols)
    throw DimensionError("spmv: matrix has " + std::to_string(m.cols) + " cols, vector has " +
                         std::to_string(x.numel()) + " elements");
  Tensor<T> y({m.rows});
  const T* px = x.data();
  T* py = y.data();
  size_t k = 0;
  for (int64_t i = 0; i < m.rows; ++i) {
    T acc = 0;
    const int64_t base = i * m.cols;
    for (int64_t j = 0; j < m.cols; ++j)
      if (m.presence.get(base + j)) acc += m.nonzeros[k++] * px[j];
    py[i] = acc;
  }
  return y;
}

template <typename T>
Tensor<T> spmv(const CsrcMatrix<T>& m, const Tensor<T>& x) {
  if (x.numel() != m.cols)
    throw DimensionError("spmv: matrix has " + std::to_string(m.cols) + " cols, vector has " +
                         std::to_string(x.numel()) + " elements");
  Tensor<T> y({m.rows});
  const T* px = x.data();
  T* py = y.data();
  int64_t pos = 0;
  for (size_t e = 0; e < m.values.size(); ++e) {
    pos += m.counts[e];
    if (pos >= m.numel()) throw IoError("csrc matrix: entries overrun the dense extent");
    py[pos / m.cols] += m.values[e] * px[pos % m.cols];
    ++pos;
  }
  return y;
}

// Number of CSR(C) entries (nonzeros plus padding) the encoder would emit,
// without materializing them.
template <typename T>
int64_t csrc_entry_count(const Tensor<T>& dense, int count_bits = 4) {
  require_2d(dense, "csrc_entry_count");
  const int64_t max_count = (int64_t(1) << count_bits) - 1;
  const T* p = dense.data();
  int64_t entries = 0, run = 0;
  for (int64_t i = 0; i < dense.numel(); ++i) {
    if (is_stored_zero(p[i])) {
      ++run;
      continue;
    }
    while (run > max_count) {
      ++entries;
      run -= max_count + 1;
    }
    ++entries;
    run = 0;
  }
  while (run > 0) {
    ++entries;
    run -= std::min(run, max_count + 1);
  }
  return entries;
}

// Extract row i of the encoded matrix into a dense vector (used by sparse-path
// embedding lookups).
template <typename T>
Tensor<T> extract_row(const BitmaskMatrix<T>& m, int64_t i) {
  if (i < 0 || i >= m.rows) throw IndexError("extract_row: row " + std::to_string(i) + " out of range");
  Tensor<T> out({m.cols});
  size_t k = 0;
  for (int64_t f = 0; f < i * m.cols; ++f)
    if (m.presence.get(f)) ++k;
  for (int64_t j = 0; j < m.cols; ++j)
    if (m.presence.get(i * m.cols + j)) out.at(j) = m.nonzeros[k++];
  return out;
}

template <typename T>
Tensor<T> extract_row(const CsrcMatrix<T>& m, int64_t i) {
  if (i < 0 || i >= m.rows) throw IndexError("extract_row: row " + std::to_string(i) + " out of range");
  Tensor<T> out({m.cols});
  int64_t pos = 0;
  for (size_t e = 0; e < m.values.size(); ++e) {
    pos += m.counts[e];
    int64_t r = pos / m.cols;
    if (r > i) break;
    if (r == i) out.at(pos % m.cols) = m.values[e];
    ++pos;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Footprint accounting. MB means 10^6 bytes throughout.
// ---------------------------------------------------------------------------
struct FootprintReport {
  int64_t total_params = 0;
  int64_t nnz = 0;
  int64_t nnz_including_padding = 0;  // equals nnz for the theoretical figure
  int count_bits = 4;
  int bytes_per_elem = 4;
  int64_t dense_bytes = 0;
  int64_t payload_bytes = 0;  // nnz * bytes_per_elem
  // Unset for a dense (0% sparsity) tensor, where no sparse representation
  // is stored at all.
  std::optional<int64_t> bitmask_overhead_bytes;
  std::optional<int64_t> csrc_overhead_bytes;
  int64_t best_total_bytes = 0;  // payload + min overhead (dense_bytes when dense)

  double mb(int64_t bytes) const { return double(bytes) / 1e6; }
  double best_total_mb() const { return mb(best_total_bytes); }
};

// Pure arithmetic report; nnz_including_padding defaults to nnz, i.e. the
// theoretical CSR(C) overhead that ignores run-length saturation.
FootprintReport footprint(int64_t total_params, int64_t nnz, int count_bits = 4, int bytes_per_elem = 4,
                          std::optional<int64_t> nnz_including_padding = std::nullopt);

// Fixed-width little-endian bit packing for CSR(C) count fields.
std::vector<uint8_t> pack_bits(const std::vector<uint8_t>& vals, int width);
std::vector<uint8_t> unpack_bits(const std::vector<uint8_t>& bytes, int width, int64_t count);

void write_bitmask_file(const std::string& path, const BitmaskMatrix<float>& m);
void write_csrc_file(const std::string& path, const CsrcMatrix<float>& m);

// ---------------------------------------------------------------------------
// On-disk formats. Little-endian; magic "SBM1" (bit-mask) / "SCM1" (CSR(C));
// header carries version, dims, dtype code and payload count; bit order
// inside bytes is least-significant first.
// ---------------------------------------------------------------------------
template <typename T>
void serialize_bitmask(ByteWriter& w, const BitmaskMatrix<T>& m) {
  w.magic("SBM1");
  w.u32(1);
  w.u64(uint64_t(m.rows));
  w.u64(uint64_t(m.cols));
  w.u8(uint8_t(dtype_of<T>()));
  w.u64(uint64_t(m.nonzeros.size()));
  w.raw(m.presence.bytes().data(), m.presence.bytes().size());
  w.raw(m.nonzeros.data(), m.nonzeros.size() * sizeof(T));
}

template <typename T>
void serialize_csrc(ByteWriter& w, const CsrcMatrix<T>& m) {
  w.magic("SCM1");
  w.u32(1);
  w.u64(uint64_t(m.rows));
  w.u64(uint64_t(m.cols));
  w.u8(uint8_t(dtype_of<T>()));
  w.u8(uint8_t(m.count_bits));
  w.u64(uint64_t(m.values.size()));
  auto packed = pack_bits(m.counts, m.count_bits);
  w.raw(packed.data(), packed.size());
  w.raw(m.values.data(), m.values.size() * sizeof(T));
}

template <typename T>
BitmaskMatrix<T> parse_bitmask(ByteReader& r) {
  r.expect_magic("SBM1");
  if (r.u32() != 1) throw IoError("bitmask file: unsupported version");
  BitmaskMatrix<T> m;
  m.rows = int64_t(r.u64());
  m.cols = int64_t(r.u64());
  Dtype dt = Dtype(r.u8());
  if (dt != dtype_of<T>()) throw IoError("bitmask file: dtype does not match requested scalar type");
  uint64_t payload = r.u64();
  std::vector<uint8_t> bits((size_t(m.numel()) + 7) / 8, 0);
  r.raw(bits.data(), bits.size());
  m.presence.assign_bytes(m.numel(), std::move(bits));
  m.nonzeros.assign(size_t(payload), T(0));
  r.raw(m.nonzeros.data(), size_t(payload) * sizeof(T));
  if (m.presence.count_ones() != int64_t(payload)) throw IoError("bitmask file: presence popcount != payload count");
  return m;
}

template <typename T>
CsrcMatrix<T> parse_csrc(ByteReader& r) {
  r.expect_magic("SCM1");
  if (r.u32() != 1) throw IoError("csrc file: unsupported version");
  CsrcMatrix<T> m;
  m.rows = int64_t(r.u64());
  m.cols = int64_t(r.u64());
  Dtype dt = Dtype(r.u8());
  if (dt != dtype_of<T>()) throw IoError("csrc file: dtype does not match requested scalar type");
  m.count_bits = int(r.u8());
  if (m.count_bits < 1 || m.count_bits > 8) throw IoError("csrc file: bad count_bits");
  uint64_t payload = r.u64();
  std::vector<uint8_t> packed((size_t(payload) * size_t(m.count_bits) + 7) / 8, 0);
  r.raw(packed.data(), packed.size());
  m.counts = unpack_bits(packed, m.count_bits, int64_t(payload));
  m.values.assign(size_t(payload), T(0));
  r.raw(m.values.data(), size_t(payload) * sizeof(T));
  return m;
}

}  // namespace pruneforge
