#include "pruneforge/sparse_model.hpp"

#include <cmath>

#include "pruneforge/layers.hpp"

namespace pruneforge {

int64_t SparseEntry::rows() const {
  switch (codec) {
    case SparseCodec::Dense: return dense.rank() == 2 ? dense.rows() : dense.numel();
    case SparseCodec::Bitmask: return bitmask.rows;
    case SparseCodec::Csrc: return csrc.rows;
  }
  return 0;
}

int64_t SparseEntry::cols() const {
  switch (codec) {
    case SparseCodec::Dense: return dense.rank() == 2 ? dense.cols() : 1;
    case SparseCodec::Bitmask: return bitmask.cols;
    case SparseCodec::Csrc: return csrc.cols;
  }
  return 0;
}

int64_t SparseEntry::total() const { return rows() * cols(); }

int64_t SparseEntry::nnz() const {
  switch (codec) {
    case SparseCodec::Dense: {
      int64_t n = 0;
      for (int64_t i = 0; i < dense.numel(); ++i)
        if (!is_stored_zero(dense.at(i))) ++n;
      return n;
    }
    case SparseCodec::Bitmask: return int64_t(bitmask.nonzeros.size());
    case SparseCodec::Csrc: return csrc.entry_count() - csrc.padding_entries();
  }
  return 0;
}

Tensor<float> SparseEntry::to_dense() const {
  switch (codec) {
    case SparseCodec::Dense: return dense;
    case SparseCodec::Bitmask: return decode_bitmask(bitmask);
    case SparseCodec::Csrc: return decode_csrc(csrc);
  }
  throw Error("unreachable codec");
}

Tensor<float> SparseEntry::matvec(const Tensor<float>& x) const {
  switch (codec) {
    case SparseCodec::Dense: {
      Tensor<float> y({dense.rows()});
      for (int64_t i = 0; i < dense.rows(); ++i) {
        float acc = 0;
        for (int64_t j = 0; j < dense.cols(); ++j) acc += dense(i, j) * x.at(j);
        y.at(i) = acc;
      }
      return y;
    }
    case SparseCodec::Bitmask: return spmv(bitmask, x);
    case SparseCodec::Csrc: return spmv(csrc, x);
  }
  throw Error("unreachable codec");
}

Tensor<float> SparseEntry::row(int64_t i) const {
  switch (codec) {
    case SparseCodec::Dense: {
      if (dense.rank() != 2) throw DimensionError("sparse entry row: '" + name + "' is not a matrix");
      Tensor<float> out({dense.cols()});
      std::memcpy(out.data(), dense.data() + i * dense.cols(), size_t(dense.cols()) * sizeof(float));
      return out;
    }
    case SparseCodec::Bitmask: return extract_row(bitmask, i);
    case SparseCodec::Csrc: return extract_row(csrc, i);
  }
  throw Error("unreachable codec");
}

const SparseEntry& SparseModel::at(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return e;
  throw IoError("sparse model: missing entry '" + name + "'");
}

void SparseModel::write_file(const std::string& path) const {
  ByteWriter w;
  w.magic("SMF1");
  w.u32(1);
  w.u64(entries.size());
  for (const auto& e : entries) {
    w.u16(uint16_t(e.name.size()));
    w.raw(e.name.data(), e.name.size());
    w.u8(uint8_t(e.codec));
    switch (e.codec) {
      case SparseCodec::Dense: {
        w.u8(uint8_t(Dtype::F32));
        w.u8(uint8_t(e.dense.rank()));
        for (int64_t d : e.dense.shape()) w.u64(uint64_t(d));
        w.raw(e.dense.data(), size_t(e.dense.numel()) * sizeof(float));
        break;
      }
      case SparseCodec::Bitmask: serialize_bitmask(w, e.bitmask); break;
      case SparseCodec::Csrc: serialize_csrc(w, e.csrc); break;
    }
  }
  write_file_bytes(path, w.bytes());
}

SparseModel SparseModel::read_file(const std::string& path) {
  auto bytes = read_file_bytes(path);
  ByteReader r(bytes);
  r.expect_magic("SMF1");
  if (r.u32() != 1) throw IoError("sparse model: unsupported version");
  uint64_t count = r.u64();
  SparseModel m;
  for (uint64_t i = 0; i < count; ++i) {
    SparseEntry e;
    uint16_t nlen = r.u16();
    e.name.resize(nlen);
    r.raw(e.name.data(), nlen);
    e.codec = SparseCodec(r.u8());
    switch (e.codec) {
      case SparseCodec::Dense: {
        if (r.u8() != uint8_t(Dtype::F32)) throw IoError("sparse model: only f32 payloads are supported");
        uint8_t rank = r.u8();
        std::vector<int64_t> dims;
        for (uint8_t d = 0; d < rank; ++d) dims.push_back(int64_t(r.u64()));
        Tensor<float> t(dims);
        r.raw(t.data(), size_t(t.numel()) * sizeof(float));
        e.dense = std::move(t);
        break;
      }
      case SparseCodec::Bitmask: e.bitmask = parse_bitmask<float>(r); break;
      case SparseCodec::Csrc: e.csrc = parse_csrc<float>(r); break;
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

SparseModel build_sparse_model(const Checkpoint& ckpt, const std::string& format, int count_bits) {
  if (format != "best" && format != "bitmask" && format != "csrc")
    throw ConfigError("compress format must be best, bitmask or csrc");
  SparseModel m;
  for (const auto& entry : ckpt.entries) {
    if (entry.kind != uint8_t(CkptKind::TensorData)) continue;
    Tensor<float> values = ckpt.get_tensor<float>(entry.name);
    const CkptEntry* mask_entry = ckpt.find(entry.name + ".mask");

    SparseEntry out;
    out.name = entry.name;
    if (!mask_entry || values.rank() != 2) {
      out.codec = SparseCodec::Dense;
      out.dense = std::move(values);
      m.entries.push_back(std::move(out));
      continue;
    }
    BitArray mask = ckpt.get_mask(entry.name + ".mask");
    Tensor<float> eff(values.shape());
    for (int64_t i = 0; i < values.numel(); ++i) eff.at(i) = mask.get(i) ? values.at(i) : 0.0f;

    const int64_t total = eff.numel();
    const int64_t nnz = mask.count_ones();
    const int64_t dense_bytes = total * 4;
    const int64_t bitmask_bytes = nnz * 4 + (total + 7) / 8;
    const int64_t padded = csrc_entry_count(eff, count_bits);
    const int64_t csrc_bytes = padded * 4 + (padded * count_bits + 7) / 8;

    std::string chosen = format;
    if (format == "best") {
      if (dense_bytes <= bitmask_bytes && dense_bytes <= csrc_bytes)
        chosen = "dense";
      else if (bitmask_bytes <= csrc_bytes)
        chosen = "bitmask";
      else
        chosen = "csrc";
    }
    if (chosen == "dense") {
      out.codec = SparseCodec::Dense;
      out.dense = std::move(eff);
    } else if (chosen == "bitmask") {
      out.codec = SparseCodec::Bitmask;
      out.bitmask = encode_bitmask(eff);
    } else {
      out.codec = SparseCodec::Csrc;
      out.csrc = encode_csrc(eff, count_bits);
    }
    m.entries.push_back(std::move(out));
  }
  if (m.entries.empty()) throw IoError("checkpoint holds no tensors to compress");
  return m;
}

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

Tensor<float> mlp_infer_sparse(const SparseModel& m, const MlpArch& arch, const Tensor<float>& inputs) {
  Tensor<float> logits({inputs.rows(), arch.output_dim});
  for (int64_t r = 0; r < inputs.rows(); ++r) {
    Tensor<float> x({inputs.cols()});
    std::memcpy(x.data(), inputs.data() + r * inputs.cols(), size_t(inputs.cols()) * sizeof(float));
    for (size_t l = 0; l < arch.hidden.size(); ++l) {
      auto y = m.at("fc" + std::to_string(l) + ".w").matvec(x);
      const auto& b = m.at("fc" + std::to_string(l) + ".b").dense;
      for (int64_t i = 0; i < y.numel(); ++i) y.at(i) = std::tanh(y.at(i) + b.at(i));
      x = std::move(y);
    }
    auto y = m.at("head.proj").matvec(x);
    const auto& b = m.at("head.b").dense;
    for (int64_t i = 0; i < y.numel(); ++i) logits(r, i) = y.at(i) + b.at(i);
  }
  return logits;
}

Tensor<float> mlp_infer_dense(const SparseModel& m, const MlpArch& arch, const Tensor<float>& inputs) {
  Tensor<float> act = inputs;
  for (size_t l = 0; l < arch.hidden.size(); ++l) {
    LinearLayer<float> layer("fc", m.at("fc" + std::to_string(l) + ".w").to_dense(),
                             m.at("fc" + std::to_string(l) + ".b").dense);
    act = tanh_map(layer.forward(act));
  }
  SoftmaxXentHead<float> head("head", m.at("head.proj").to_dense(), m.at("head.b").dense);
  return head.logits(act);
}

namespace {

double nll_from_logits(const Tensor<float>& logits, int32_t target) {
  float mx = logits.at(0);
  for (int64_t j = 1; j < logits.numel(); ++j) mx = std::max(mx, logits.at(j));
  double denom = 0;
  for (int64_t j = 0; j < logits.numel(); ++j) denom += std::exp(double(logits.at(j)) - double(mx));
  return -(double(logits.at(target)) - double(mx) - std::log(denom));
}

}  // namespace

LmInferResult lstm_infer_sparse(const SparseModel& m, const LstmArch& arch, const std::vector<int32_t>& ids) {
  if (ids.size() < 2) throw ConfigError("lm inference needs at least two characters");
  const int64_t h = arch.hidden;
  const SparseEntry& emb = m.at("emb.table");
  const SparseEntry& w0 = m.at("lstm0.w");
  const SparseEntry& w1 = m.at("lstm1.w");
  const Tensor<float>& b0 = m.at("lstm0.b").dense;
  const Tensor<float>& b1 = m.at("lstm1.b").dense;
  const SparseEntry& proj = m.at("head.proj");
  const Tensor<float>& hb = m.at("head.b").dense;

  std::vector<Tensor<float>> hs, cs;
  for (int l = 0; l < 2; ++l) {
    hs.push_back(Tensor<float>({h}));
    cs.push_back(Tensor<float>({h}));
  }
  auto cell_step = [&](const SparseEntry& w, const Tensor<float>& b, Tensor<float>& hstate, Tensor<float>& cstate,
                       const Tensor<float>& x) {
    Tensor<float> z({x.numel() + h});
    std::memcpy(z.data(), x.data(), size_t(x.numel()) * sizeof(float));
    std::memcpy(z.data() + x.numel(), hstate.data(), size_t(h) * sizeof(float));
    auto pre = w.matvec(z);
    for (int64_t k = 0; k < h; ++k) {
      const float gi = 1.0f / (1.0f + std::exp(-(pre.at(k) + b.at(k))));
      const float gf = 1.0f / (1.0f + std::exp(-(pre.at(h + k) + b.at(h + k) + 1.0f)));
      const float gg = std::tanh(pre.at(2 * h + k) + b.at(2 * h + k));
      const float go = 1.0f / (1.0f + std::exp(-(pre.at(3 * h + k) + b.at(3 * h + k))));
      cstate.at(k) = gf * cstate.at(k) + gi * gg;
      hstate.at(k) = go * std::tanh(cstate.at(k));
    }
  };

  LmInferResult res;
  double total = 0;
  for (size_t t = 0; t + 1 < ids.size(); ++t) {
    Tensor<float> x = emb.row(ids[t]);
    cell_step(w0, b0, hs[0], cs[0], x);
    cell_step(w1, b1, hs[1], cs[1], hs[0]);
    auto logits = proj.matvec(hs[1]);
    for (int64_t j = 0; j < logits.numel(); ++j) logits.at(j) += hb.at(j);
    total += nll_from_logits(logits, ids[t + 1]);
    ++res.positions;
  }
  res.mean_nll = total / double(res.positions);
  return res;
}

LmInferResult lstm_infer_dense(const SparseModel& m, const LstmArch& arch, const std::vector<int32_t>& ids) {
  if (ids.size() < 2) throw ConfigError("lm inference needs at least two characters");
  EmbeddingLayer<float> emb("emb", m.at("emb.table").to_dense());
  LstmCell<float> c0("lstm0", m.at("lstm0.w").to_dense(), m.at("lstm0.b").dense, 1.0f);
  LstmCell<float> c1("lstm1", m.at("lstm1.w").to_dense(), m.at("lstm1.b").dense, 1.0f);
  SoftmaxXentHead<float> head("head", m.at("head.proj").to_dense(), m.at("head.b").dense);

  auto s0 = LstmState<float>::zero(1, arch.hidden);
  auto s1 = LstmState<float>::zero(1, arch.hidden);
  LmInferResult res;
  double total = 0;
  for (size_t t = 0; t + 1 < ids.size(); ++t) {
    auto x = emb.forward({ids[t]});
    s0 = c0.forward(x, s0);
    s1 = c1.forward(s0.h, s1);
    total += head.forward_loss(s1.h, {ids[t + 1]});
    ++res.positions;
  }
  res.mean_nll = total / double(res.positions);
  return res;
}

}  // namespace pruneforge
