// Binary checkpoint container: named tensors, bit-packed masks, optimizer
// state and scalar counters in one little-endian file (magic "SPZ1").
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pruneforge/common.hpp"
#include "pruneforge/tensor.hpp"

namespace pruneforge {

enum class CkptKind : uint8_t { TensorData = 0, Mask = 1, OptState = 2, Scalar = 3 };

// dtype codes on disk: 0 = packed bits, 1 = f32, 2 = f64, 3 = u64
constexpr uint8_t kCkptDtypeBits = 0;
constexpr uint8_t kCkptDtypeU64 = 3;

struct CkptEntry {
  std::string name;
  uint8_t kind = 0;
  uint8_t dtype = 0;
  std::vector<uint64_t> dims;
  std::vector<uint8_t> payload;

  uint64_t elem_count() const {
    uint64_t n = 1;
    for (uint64_t d : dims) n *= d;
    return n;
  }
};

struct Checkpoint {
  std::vector<CkptEntry> entries;

  const CkptEntry* find(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return &e;
    return nullptr;
  }

  template <typename T>
  void put_tensor(const std::string& name, CkptKind kind, const Tensor<T>& t) {
    CkptEntry e;
    e.name = name;
    e.kind = uint8_t(kind);
    e.dtype = uint8_t(dtype_of<T>());
    for (int64_t d : t.shape()) e.dims.push_back(uint64_t(d));
    e.payload.resize(size_t(t.numel()) * sizeof(T));
    std::memcpy(e.payload.data(), t.data(), e.payload.size());
    entries.push_back(std::move(e));
  }

  template <typename T>
  Tensor<T> get_tensor(const std::string& name) const {
    const CkptEntry* e = find(name);
    if (!e) throw IoError("checkpoint: missing entry '" + name + "'");
    if (e->dtype != uint8_t(dtype_of<T>())) throw IoError("checkpoint: dtype mismatch for '" + name + "'");
    std::vector<int64_t> shape;
    for (uint64_t d : e->dims) shape.push_back(int64_t(d));
    Tensor<T> t(shape);
    if (e->payload.size() != size_t(t.numel()) * sizeof(T))
      throw IoError("checkpoint: payload size mismatch for '" + name + "'");
    std::memcpy(t.data(), e->payload.data(), e->payload.size());
    return t;
  }

  void put_mask(const std::string& name, const BitArray& mask, const std::vector<int64_t>& dims) {
    CkptEntry e;
    e.name = name;
    e.kind = uint8_t(CkptKind::Mask);
    e.dtype = kCkptDtypeBits;
    for (int64_t d : dims) e.dims.push_back(uint64_t(d));
    e.payload = mask.bytes();
    entries.push_back(std::move(e));
  }

  BitArray get_mask(const std::string& name) const {
    const CkptEntry* e = find(name);
    if (!e) throw IoError("checkpoint: missing mask '" + name + "'");
    if (e->dtype != kCkptDtypeBits) throw IoError("checkpoint: entry '" + name + "' is not a mask");
    BitArray m;
    m.assign_bytes(int64_t(e->elem_count()), e->payload);
    return m;
  }

  void put_scalar_u64(const std::string& name, uint64_t v) {
    CkptEntry e;
    e.name = name;
    e.kind = uint8_t(CkptKind::Scalar);
    e.dtype = kCkptDtypeU64;
    e.payload.resize(8);
    for (int i = 0; i < 8; ++i) e.payload[size_t(i)] = uint8_t(v >> (8 * i));
    entries.push_back(std::move(e));
  }

  uint64_t get_scalar_u64(const std::string& name) const {
    const CkptEntry* e = find(name);
    if (!e) throw IoError("checkpoint: missing scalar '" + name + "'");
    if (e->dtype != kCkptDtypeU64 || e->payload.size() != 8)
      throw IoError("checkpoint: entry '" + name + "' is not a u64 scalar");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(e->payload[size_t(i)]) << (8 * i);
    return v;
  }
};

std::vector<uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(ByteReader& r);
void write_checkpoint_file(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint_file(const std::string& path);

}  // namespace pruneforge
