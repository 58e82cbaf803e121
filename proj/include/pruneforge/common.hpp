// Shared error types, bit array, byte I/O and the parallel-for used by the kernels.
#pragma once

#include <algorithm>
#include <bit>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace pruneforge {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape/size disagreement between operands.
struct DimensionError : Error {
  using Error::Error;
};

// Out-of-domain argument (negative scale, nnz > total, ...).
struct ParamError : Error {
  using Error::Error;
};

// Invalid lookup index (embedding id, target id).
struct IndexError : Error {
  using Error::Error;
};

// Bad experiment configuration; maps to CLI exit code 2.
struct ConfigError : Error {
  using Error::Error;
};

// Non-finite training loss; maps to CLI exit code 3.
struct DivergenceError : Error {
  int64_t step;
  DivergenceError(const std::string& msg, int64_t step_) : Error(msg), step(step_) {}
};

// File/format failure; maps to CLI exit code 4.
struct IoError : Error {
  using Error::Error;
};

// API misuse, e.g. backward with a cache from a different forward.
struct ContractError : Error {
  using Error::Error;
};

inline std::string str_printf(const char* fmt, ...) {
  va_list args;
  va_start(args, fmt);
  char buf[512];
  vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  return std::string(buf);
}

// ---------------------------------------------------------------------------
// Packed bit array. Bit i of byte j corresponds to element 8j+i (LSB first),
// which is also the on-disk order used by the sparse codecs and checkpoints.
// ---------------------------------------------------------------------------
class BitArray {
 public:
  BitArray() = default;
  explicit BitArray(int64_t n, bool fill = false)
      : size_(n), bytes_((n + 7) / 8, fill ? 0xFF : 0x00) {
    trim_tail();
  }

  int64_t size() const { return size_; }
  bool get(int64_t i) const { return (bytes_[i >> 3] >> (i & 7)) & 1; }
  void set(int64_t i, bool v) {
    uint8_t m = uint8_t(1u << (i & 7));
    if (v)
      bytes_[i >> 3] |= m;
    else
      bytes_[i >> 3] &= uint8_t(~m);
  }
  void fill(bool v) {
    std::fill(bytes_.begin(), bytes_.end(), v ? 0xFF : 0x00);
    trim_tail();
  }

  int64_t count_ones() const {
    int64_t c = 0;
    for (uint8_t b : bytes_) c += std::popcount(unsigned(b));
    return c;
  }
  int64_t count_zeros() const { return size_ - count_ones(); }

  const std::vector<uint8_t>& bytes() const { return bytes_; }
  void assign_bytes(int64_t n, std::vector<uint8_t> raw) {
    if ((int64_t)raw.size() != (n + 7) / 8) throw DimensionError("BitArray: byte payload does not match bit count");
    size_ = n;
    bytes_ = std::move(raw);
    trim_tail();
  }

  bool operator==(const BitArray& o) const = default;

 private:
  // Unused tail bits are kept zero so byte-level comparison and hashing are well defined.
  void trim_tail() {
    if (size_ % 8 != 0 && !bytes_.empty()) bytes_.back() &= uint8_t((1u << (size_ % 8)) - 1);
  }
  int64_t size_ = 0;
  std::vector<uint8_t> bytes_;
};

// ---------------------------------------------------------------------------
// Little-endian byte stream helpers shared by every on-disk format.
// ---------------------------------------------------------------------------
class ByteWriter {
 public:
  void raw(const void* p, size_t n) {
    const uint8_t* b = static_cast<const uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void u8(uint8_t v) { raw(&v, 1); }
  void u16(uint16_t v) { le(v); }
  void u32(uint32_t v) { le(v); }
  void u64(uint64_t v) { le(v); }
  void magic(const char m[4]) { raw(m, 4); }
  const std::vector<uint8_t>& bytes() const { return buf_; }

 private:
  template <typename U>
  void le(U v) {
    for (size_t i = 0; i < sizeof(U); ++i) buf_.push_back(uint8_t(v >> (8 * i)));
  }
  std::vector<uint8_t> buf_;
};

class ByteReader {
 public:
  ByteReader(const uint8_t* p, size_t n) : p_(p), end_(p + n) {}
  explicit ByteReader(const std::vector<uint8_t>& v) : ByteReader(v.data(), v.size()) {}

  void raw(void* out, size_t n) {
    if (size_t(end_ - p_) < n) throw IoError("unexpected end of stream");
    std::memcpy(out, p_, n);
    p_ += n;
  }
  uint8_t u8() {
    uint8_t v;
    raw(&v, 1);
    return v;
  }
  uint16_t u16() { return le<uint16_t>(); }
  uint32_t u32() { return le<uint32_t>(); }
  uint64_t u64() { return le<uint64_t>(); }
  void expect_magic(const char m[4]) {
    char got[4];
    raw(got, 4);
    if (std::memcmp(got, m, 4) != 0) throw IoError(std::string("bad magic, expected ") + std::string(m, 4));
  }
  size_t remaining() const { return size_t(end_ - p_); }

 private:
  template <typename U>
  U le() {
    uint8_t b[sizeof(U)];
    raw(b, sizeof(U));
    U v = 0;
    for (size_t i = 0; i < sizeof(U); ++i) v |= U(b[i]) << (8 * i);
    return v;
  }
  const uint8_t* p_;
  const uint8_t* end_;
};

std::vector<uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes);
std::string read_file_text(const std::string& path);
void write_file_text(const std::string& path, const std::string& text);

// ---------------------------------------------------------------------------
// Worker threads for the kernels. Work is split into contiguous chunks of
// output elements; every element is produced by exactly one thread with a
// sequential inner reduction, so results are bitwise identical for any
// thread count.
// ---------------------------------------------------------------------------
int thread_count();
void set_thread_count(int n);

template <typename Fn>
void parallel_for(int64_t n, Fn&& fn) {
  int workers = thread_count();
  if (workers <= 1 || n < 2 * workers) {
    fn(int64_t(0), n);
    return;
  }
  int64_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(size_t(workers - 1));
  for (int w = 1; w < workers; ++w) {
    int64_t b = std::min<int64_t>(n, w * chunk);
    int64_t e = std::min<int64_t>(n, b + chunk);
    if (b < e) pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  fn(int64_t(0), std::min<int64_t>(n, chunk));
  for (auto& t : pool) t.join();
}

}  // namespace pruneforge
