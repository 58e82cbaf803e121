#include <doctest.h>

#include <cmath>

#include "pruneforge/sparse_format.hpp"

using namespace pruneforge;

namespace {

template <typename T>
Tensor<T> random_sparse(int64_t rows, int64_t cols, double sparsity, SeededRng& rng) {
  Tensor<T> t({rows, cols});
  for (int64_t i = 0; i < t.numel(); ++i) {
    if (rng.next_unit() >= sparsity) t.at(i) = T(rng.next_uniform(-2, 2));
  }
  return t;
}

// Dense mat-vec oracle, independent of the encoded kernels.
template <typename T>
Tensor<T> dense_matvec(const Tensor<T>& m, const Tensor<T>& x) {
  Tensor<T> y({m.rows()});
  for (int64_t i = 0; i < m.rows(); ++i) {
    T acc = 0;
    for (int64_t j = 0; j < m.cols(); ++j) acc += m(i, j) * x.at(j);
    y.at(i) = acc;
  }
  return y;
}

}  // namespace

TEST_CASE("bitmask zero matrix") {
  auto m = encode_bitmask(Tensor<double>::zeros({3, 3}));
  CHECK(m.nonzeros.empty());
  CHECK(m.presence.count_ones() == 0);
  CHECK(decode_bitmask(m).bitwise_equal(Tensor<double>::zeros({3, 3})));
}

TEST_CASE("bitmask identity pattern") {
  auto m = encode_bitmask(Tensor<double>::identity(3));
  CHECK(m.nonzeros.size() == 3);
  CHECK(m.presence.get(0));
  CHECK(m.presence.get(4));
  CHECK(m.presence.get(8));
  CHECK(m.presence.count_ones() == 3);
}

TEST_CASE("bitmask random round-trip") {
  SeededRng rng(11);
  auto t = random_sparse<double>(16, 16, 0.9, rng);
  CHECK(decode_bitmask(encode_bitmask(t)).bitwise_equal(t));
}

TEST_CASE("csrc long-run padding example") {
  // 20 zeros then 7.0 with 4-bit counts -> (15, 0.0), (4, 7.0)
  Tensor<double> t({1, 21});
  t.at(20) = 7.0;
  auto m = encode_csrc(t, 4);
  REQUIRE(m.values.size() == 2);
  CHECK(m.counts[0] == 15);
  CHECK(m.values[0] == 0.0);
  CHECK(m.counts[1] == 4);
  CHECK(m.values[1] == 7.0);
  CHECK(decode_csrc(m).bitwise_equal(t));
}

TEST_CASE("csrc dense matrix has all-zero counts") {
  SeededRng rng(12);
  Tensor<double> t({4, 5});
  for (int64_t i = 0; i < t.numel(); ++i) t.at(i) = rng.next_uniform(0.5, 1.5);
  auto m = encode_csrc(t, 4);
  CHECK(m.entry_count() == t.numel());
  for (auto c : m.counts) CHECK(c == 0);
}

TEST_CASE("csrc coverage invariant") {
  SeededRng rng(13);
  for (double s : {0.0, 0.5, 0.9, 0.99, 1.0}) {
    for (int cb : {4, 5}) {
      auto t = random_sparse<double>(9, 14, s, rng);
      auto m = encode_csrc(t, cb);
      int64_t covered = 0;
      for (size_t e = 0; e < m.values.size(); ++e) covered += m.counts[e] + 1;
      CHECK(covered == t.numel());
      CHECK(decode_csrc(m).bitwise_equal(t));
    }
  }
}

TEST_CASE("codec round-trips across sparsity levels with engineered runs") {
  SeededRng rng(14);
  for (double s : {0.0, 0.5, 0.9, 0.99, 1.0}) {
    auto t = random_sparse<double>(32, 32, s, rng);
    CHECK(decode_bitmask(encode_bitmask(t)).bitwise_equal(t));
    CHECK(decode_csrc(encode_csrc(t, 4)).bitwise_equal(t));
    CHECK(decode_csrc(encode_csrc(t, 5)).bitwise_equal(t));
  }
  // zero-runs of exactly 16 and 32 with 4-bit counts (2^4 and 2*2^4)
  for (int64_t run : {int64_t(16), int64_t(32)}) {
    Tensor<double> t({1, run + 2});
    t.at(0) = 1.5;
    t.at(run + 1) = -2.5;  // run zeros in between
    CHECK(decode_csrc(encode_csrc(t, 4)).bitwise_equal(t));
    Tensor<double> trail({1, run + 1});
    trail.at(0) = 3.25;  // run trailing zeros
    CHECK(decode_csrc(encode_csrc(trail, 4)).bitwise_equal(trail));
    CHECK(decode_bitmask(encode_bitmask(trail)).bitwise_equal(trail));
  }
}

TEST_CASE("negative zero survives round-trips bitwise") {
  Tensor<double> t({1, 3});
  t.at(1) = -0.0;
  CHECK(std::signbit(decode_bitmask(encode_bitmask(t)).at(1)));
  CHECK(std::signbit(decode_csrc(encode_csrc(t, 4)).at(1)));
}

TEST_CASE("spmv identity and zero") {
  Tensor<double> x({4}, {1, 2, 3, 4});
  auto id = encode_bitmask(Tensor<double>::identity(4));
  CHECK(spmv(id, x).bitwise_equal(x));
  auto idc = encode_csrc(Tensor<double>::identity(4), 4);
  CHECK(spmv(idc, x).bitwise_equal(x));
  auto z = encode_bitmask(Tensor<double>::zeros({4, 4}));
  auto y = spmv(z, x);
  for (int64_t i = 0; i < 4; ++i) CHECK(y.at(i) == 0.0);
}

TEST_CASE("spmv matches dense oracle") {
  SeededRng rng(15);
  auto t = random_sparse<double>(64, 64, 0.85, rng);
  Tensor<double> x({64});
  for (int64_t i = 0; i < 64; ++i) x.at(i) = rng.next_uniform(-1, 1);
  auto want = dense_matvec(t, x);
  for (auto&& got : {spmv(encode_bitmask(t), x), spmv(encode_csrc(t, 4), x)}) {
    for (int64_t i = 0; i < 64; ++i) CHECK(std::fabs(got.at(i) - want.at(i)) <= 1e-12);
  }
  Tensor<double> bad({63});
  CHECK_THROWS_AS(spmv(encode_bitmask(t), bad), DimensionError);
}

TEST_CASE("extract_row matches dense rows") {
  SeededRng rng(16);
  auto t = random_sparse<double>(12, 7, 0.6, rng);
  auto bm = encode_bitmask(t);
  auto cm = encode_csrc(t, 4);
  for (int64_t i = 0; i < 12; ++i) {
    auto rb = extract_row(bm, i);
    auto rc = extract_row(cm, i);
    for (int64_t j = 0; j < 7; ++j) {
      CHECK(rb.at(j) == t(i, j));
      CHECK(rc.at(j) == t(i, j));
    }
  }
}

TEST_CASE("footprint reproduces the sparse-MobileNet overhead table") {
  // 4.21M params; bit-mask stays at 0.52-0.53 MB; CSR(C) scales with nnz.
  const int64_t total = 4210000;
  struct Row {
    int64_t nnz;
    double csrc_mb;
  };
  for (auto [nnz, csrc_mb] : {Row{2130000, 1.06}, Row{1090000, 0.54}, Row{460000, 0.23}, Row{250000, 0.13}}) {
    auto r = footprint(total, nnz);
    REQUIRE(r.bitmask_overhead_bytes.has_value());
    REQUIRE(r.csrc_overhead_bytes.has_value());
    CHECK(std::fabs(r.mb(*r.bitmask_overhead_bytes) - 0.52) <= 0.01);
    CHECK(std::fabs(r.mb(*r.csrc_overhead_bytes) - csrc_mb) <= 0.01);
  }
  auto dense = footprint(total, total);
  CHECK(!dense.bitmask_overhead_bytes.has_value());
  CHECK(!dense.csrc_overhead_bytes.has_value());
  CHECK(dense.best_total_bytes == total * 4);
}

TEST_CASE("footprint best totals match the size comparison table") {
  struct Row {
    int64_t nnz;
    double best_mb;
  };
  // large-sparse rows: payload + min(bit-mask, CSR(C)) overhead
  for (auto [nnz, best_mb] : {Row{2130000, 9.04}, Row{1090000, 4.88}, Row{460000, 2.07}, Row{250000, 1.13}}) {
    auto r = footprint(4210000, nnz);
    CHECK(std::fabs(r.best_total_mb() - best_mb) <= 0.01);
  }
  // small-dense rows: params * 4 bytes, no overhead
  struct DRow {
    int64_t params;
    double mb;
  };
  for (auto [params, mb] : {DRow{2570000, 10.28}, DRow{1320000, 5.28}, DRow{460000, 1.84}}) {
    auto r = footprint(params, params);
    CHECK(std::fabs(r.best_total_mb() - mb) <= 0.01);
  }
}

TEST_CASE("footprint overhead crossover") {
  // csrc beats bitmask iff nnz * count_bits < total_params (bit-level);
  // byte rounding can only blur the boundary by one byte.
  for (int64_t nnz : {int64_t(100), int64_t(249), int64_t(250), int64_t(251), int64_t(600)}) {
    auto r = footprint(1000, nnz);
    int64_t csrc_bits = nnz * 4, bitmask_bits = 1000;
    if (csrc_bits < bitmask_bits) CHECK(*r.csrc_overhead_bytes <= *r.bitmask_overhead_bytes);
    if (csrc_bits > bitmask_bits) CHECK(*r.csrc_overhead_bytes >= *r.bitmask_overhead_bytes);
    if (csrc_bits + 8 <= bitmask_bits) CHECK(*r.csrc_overhead_bytes < *r.bitmask_overhead_bytes);
    if (csrc_bits >= bitmask_bits + 8) CHECK(*r.csrc_overhead_bytes > *r.bitmask_overhead_bytes);
  }
}

TEST_CASE("footprint rejects nnz above total") {
  CHECK_THROWS_AS(footprint(10, 11), ParamError);
}

TEST_CASE("footprint separates padded from theoretical csrc overhead") {
  auto r = footprint(1000, 100, 4, 4, 130);
  CHECK(r.nnz == 100);
  CHECK(r.nnz_including_padding == 130);
  CHECK(*r.csrc_overhead_bytes == (130 * 4 + 7) / 8);
}

TEST_CASE("file round-trip for both codecs") {
  SeededRng rng(17);
  Tensor<float> t({8, 24});
  for (int64_t i = 0; i < t.numel(); ++i)
    if (rng.next_unit() > 0.8) t.at(i) = float(rng.next_uniform(-1, 1));

  auto bm = encode_bitmask(t);
  ByteWriter wb;
  serialize_bitmask(wb, bm);
  ByteReader rb(wb.bytes());
  auto bm2 = parse_bitmask<float>(rb);
  CHECK(decode_bitmask(bm2).bitwise_equal(t));

  auto cm = encode_csrc(t, 5);
  ByteWriter wc;
  serialize_csrc(wc, cm);
  ByteReader rc(wc.bytes());
  auto cm2 = parse_csrc<float>(rc);
  CHECK(cm2.count_bits == 5);
  CHECK(decode_csrc(cm2).bitwise_equal(t));

  // header is little-endian with the documented magic
  CHECK(wb.bytes()[0] == 'S');
  CHECK(wb.bytes()[1] == 'B');
  CHECK(wb.bytes()[4] == 1);  // version u32 LE
  CHECK(wb.bytes()[5] == 0);
}

TEST_CASE("pack_bits is LSB-first") {
  // values 0b0011 (3) then 0b0101 (5) at width 4 -> byte 0b0101_0011 = 0x53
  auto packed = pack_bits({3, 5}, 4);
  REQUIRE(packed.size() == 1);
  CHECK(packed[0] == 0x53);
  auto vals = unpack_bits(packed, 4, 2);
  CHECK(vals[0] == 3);
  CHECK(vals[1] == 5);
}
