#include "pruneforge/checkpoint.hpp"

namespace pruneforge {

namespace {

uint64_t payload_bytes_for(uint8_t dtype, uint64_t elems) {
  switch (dtype) {
    case kCkptDtypeBits: return (elems + 7) / 8;
    case uint8_t(Dtype::F32): return elems * 4;
    case uint8_t(Dtype::F64): return elems * 8;
    case kCkptDtypeU64: return elems * 8;
    default: throw IoError("checkpoint: unknown dtype code " + std::to_string(int(dtype)));
  }
}

}  // namespace

std::vector<uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  ByteWriter w;
  w.magic("SPZ1");
  w.u32(1);
  w.u64(ckpt.entries.size());
  for (const auto& e : ckpt.entries) {
    if (e.name.size() > 0xFFFF) throw IoError("checkpoint: entry name too long");
    w.u16(uint16_t(e.name.size()));
    w.raw(e.name.data(), e.name.size());
    w.u8(e.kind);
    w.u8(e.dtype);
    w.u8(uint8_t(e.dims.size()));
    for (uint64_t d : e.dims) w.u64(d);
    if (e.payload.size() != payload_bytes_for(e.dtype, e.elem_count()))
      throw IoError("checkpoint: entry '" + e.name + "' payload size inconsistent with dims");
    w.raw(e.payload.data(), e.payload.size());
  }
  return w.bytes();
}

Checkpoint parse_checkpoint(ByteReader& r) {
  r.expect_magic("SPZ1");
  if (r.u32() != 1) throw IoError("checkpoint: unsupported version");
  uint64_t count = r.u64();
  Checkpoint ckpt;
  ckpt.entries.reserve(size_t(count));
  for (uint64_t i = 0; i < count; ++i) {
    CkptEntry e;
    uint16_t nlen = r.u16();
    e.name.resize(nlen);
    r.raw(e.name.data(), nlen);
    e.kind = r.u8();
    e.dtype = r.u8();
    uint8_t rank = r.u8();
    for (uint8_t d = 0; d < rank; ++d) e.dims.push_back(r.u64());
    e.payload.resize(payload_bytes_for(e.dtype, e.elem_count()));
    r.raw(e.payload.data(), e.payload.size());
    ckpt.entries.push_back(std::move(e));
  }
  return ckpt;
}

void write_checkpoint_file(const std::string& path, const Checkpoint& ckpt) {
  write_file_bytes(path, serialize_checkpoint(ckpt));
}

Checkpoint read_checkpoint_file(const std::string& path) {
  auto bytes = read_file_bytes(path);
  ByteReader r(bytes);
  return parse_checkpoint(r);
}

}  // namespace pruneforge
