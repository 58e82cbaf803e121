#include "pruneforge/sparse_format.hpp"

namespace pruneforge {

FootprintReport footprint(int64_t total_params, int64_t nnz, int count_bits, int bytes_per_elem,
                          std::optional<int64_t> nnz_including_padding) {
  if (total_params < 0 || nnz < 0) throw ParamError("footprint: negative counts");
  if (nnz > total_params)
    throw ParamError("footprint: nnz " + std::to_string(nnz) + " exceeds total params " +
                     std::to_string(total_params));
  if (count_bits != 4 && count_bits != 5)
    throw ParamError("footprint: count_bits must be 4 or 5, got " + std::to_string(count_bits));
  FootprintReport r;
  r.total_params = total_params;
  r.nnz = nnz;
  r.nnz_including_padding = nnz_including_padding.value_or(nnz);
  r.count_bits = count_bits;
  r.bytes_per_elem = bytes_per_elem;
  r.dense_bytes = total_params * bytes_per_elem;
  r.payload_bytes = nnz * bytes_per_elem;
  if (nnz == total_params) {
    // Dense tensors are stored as-is; no sparse representation, no overhead.
    r.best_total_bytes = r.dense_bytes;
    return r;
  }
  r.bitmask_overhead_bytes = (total_params + 7) / 8;
  r.csrc_overhead_bytes = (r.nnz_including_padding * count_bits + 7) / 8;
  r.best_total_bytes = r.payload_bytes + std::min(*r.bitmask_overhead_bytes, *r.csrc_overhead_bytes);
  return r;
}

std::vector<uint8_t> pack_bits(const std::vector<uint8_t>& vals, int width) {
  std::vector<uint8_t> out((vals.size() * size_t(width) + 7) / 8, 0);
  size_t bitpos = 0;
  for (uint8_t v : vals) {
    for (int b = 0; b < width; ++b) {
      if ((v >> b) & 1) out[bitpos >> 3] |= uint8_t(1u << (bitpos & 7));
      ++bitpos;
    }
  }
  return out;
}

std::vector<uint8_t> unpack_bits(const std::vector<uint8_t>& bytes, int width, int64_t count) {
  if ((size_t(count) * size_t(width) + 7) / 8 > bytes.size()) throw IoError("unpack_bits: truncated bit stream");
  std::vector<uint8_t> out(size_t(count), 0);
  size_t bitpos = 0;
  for (int64_t i = 0; i < count; ++i) {
    uint8_t v = 0;
    for (int b = 0; b < width; ++b) {
      if ((bytes[bitpos >> 3] >> (bitpos & 7)) & 1) v |= uint8_t(1u << b);
      ++bitpos;
    }
    out[size_t(i)] = v;
  }
  return out;
}

void write_bitmask_file(const std::string& path, const BitmaskMatrix<float>& m) {
  ByteWriter w;
  serialize_bitmask(w, m);
  write_file_bytes(path, w.bytes());
}

void write_csrc_file(const std::string& path, const CsrcMatrix<float>& m) {
  ByteWriter w;
  serialize_csrc(w, m);
  write_file_bytes(path, w.bytes());
}

}  // namespace pruneforge
