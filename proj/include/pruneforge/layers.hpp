// Differentiable layers with hand-derived backward passes: linear, LSTM
// cell, embedding and a softmax cross-entropy head. Every weight matrix is a
// MaskedParameter; forward passes read only the masked effective weight and
// backward passes return exactly-zero gradients at masked positions.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "pruneforge/pruning.hpp"
#include "pruneforge/tensor.hpp"

namespace pruneforge {

namespace detail {
inline void check_cache_tag(const void* got, const void* want, const char* who) {
  if (got != want) throw ContractError(std::string(who) + ": backward called with a cache from a different layer");
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Linear: y = x W_eff^T + b, weight [out x in], bias [out] (never masked).
// ---------------------------------------------------------------------------
template <typename T>
struct LinearCache {
  const void* tag = nullptr;
  Tensor<T> input;
};

template <typename T>
struct LinearGrads {
  Tensor<T> input;
  Tensor<T> weight;
  Tensor<T> bias;
};

template <typename T>
class LinearLayer {
 public:
  MaskedParameter<T> weight;  // [out x in]
  Tensor<T> bias;             // [out]

  LinearLayer() = default;
  LinearLayer(std::string name, Tensor<T> w, Tensor<T> b)
      : weight(std::move(name), std::move(w)), bias(std::move(b)) {
    refresh_effective();
  }

  int64_t in_dim() const { return weight.values.cols(); }
  int64_t out_dim() const { return weight.values.rows(); }

  void refresh_effective() {
    eff_w_ = weight.effective();
    eff_w_t_ = transpose(eff_w_);
  }
  const Tensor<T>& effective_weight() const { return eff_w_; }

  Tensor<T> forward(const Tensor<T>& x, LinearCache<T>* cache = nullptr) const {
    if (x.rank() != 2 || x.cols() != in_dim())
      throw DimensionError("linear forward: input " + shape_str(x.shape()) + " does not match weight " +
                           shape_str(weight.values.shape()));
    auto y = matmul(x, eff_w_t_);
    add_row_vector_inplace(y, bias);
    if (cache) {
      cache->tag = this;
      cache->input = x;
    }
    return y;
  }

  LinearGrads<T> backward(const LinearCache<T>& cache, const Tensor<T>& dy) const {
    detail::check_cache_tag(cache.tag, this, "linear");
    if (dy.rank() != 2 || dy.cols() != out_dim() || dy.rows() != cache.input.rows())
      throw DimensionError("linear backward: output grad " + shape_str(dy.shape()) + " does not match cache");
    LinearGrads<T> g;
    g.input = matmul(dy, eff_w_);
    g.weight = matmul(transpose(dy), cache.input);
    apply_mask_to_gradient(g.weight, weight.mask);
    g.bias = colsum(dy);
    return g;
  }

 private:
  Tensor<T> eff_w_;
  Tensor<T> eff_w_t_;
};

// ---------------------------------------------------------------------------
// LSTM cell. Gate weight [4h x (in+h)] packs the input/forget/cell/output
// gates in fixed row-block order i, f, g, o; gate bias [4h]. The forget-gate
// preactivation gets forget_bias_offset added on top of its bias.
//
//   z = [x, h]                     [B x (in+h)]
//   pre = z W_eff^T + b            [B x 4h]
//   i = sig(pre_i)  f = sig(pre_f + off)  g = tanh(pre_g)  o = sig(pre_o)
//   c' = f*c + i*g                 h' = o * tanh(c')
// ---------------------------------------------------------------------------
template <typename T>
struct LstmCache {
  const void* tag = nullptr;
  Tensor<T> z, gi, gf, gg, go, c_prev, tanh_c_new;
};

template <typename T>
struct LstmGrads {
  Tensor<T> input, h_prev, c_prev;
  Tensor<T> weight, bias;
};

template <typename T>
struct LstmState {
  Tensor<T> h, c;  // each [B x h]
  static LstmState zero(int64_t batch, int64_t hidden) {
    return LstmState{Tensor<T>::zeros({batch, hidden}), Tensor<T>::zeros({batch, hidden})};
  }
};

template <typename T>
class LstmCell {
 public:
  MaskedParameter<T> gate_weight;  // [4h x (in+h)]
  Tensor<T> gate_bias;             // [4h]
  T forget_bias_offset = T(1);

  LstmCell() = default;
  LstmCell(std::string name, Tensor<T> w, Tensor<T> b, T forget_offset = T(1))
      : gate_weight(std::move(name), std::move(w)), gate_bias(std::move(b)), forget_bias_offset(forget_offset) {
    hidden_ = gate_weight.values.rows() / 4;
    input_ = gate_weight.values.cols() - hidden_;
    if (gate_weight.values.rows() % 4 != 0 || input_ <= 0)
      throw DimensionError("lstm: gate weight must be [4h x (in+h)], got " + shape_str(gate_weight.values.shape()));
    refresh_effective();
  }

  int64_t hidden_dim() const { return hidden_; }
  int64_t input_dim() const { return input_; }

  void refresh_effective() {
    eff_w_ = gate_weight.effective();
    eff_w_t_ = transpose(eff_w_);
  }

  LstmState<T> forward(const Tensor<T>& x, const LstmState<T>& state, LstmCache<T>* cache = nullptr) const {
    if (x.rank() != 2 || x.cols() != input_)
      throw DimensionError("lstm forward: input " + shape_str(x.shape()) + " does not match cell input dim " +
                           std::to_string(input_));
    if (state.h.cols() != hidden_ || state.h.rows() != x.rows() || !state.h.same_shape(state.c))
      throw DimensionError("lstm forward: state shape mismatch");
    auto z = concat_cols(x, state.h);
    auto pre = matmul(z, eff_w_t_);  // [B x 4h]
    add_row_vector_inplace(pre, gate_bias);

    const int64_t h = hidden_;
    auto pre_i = slice_cols(pre, 0, h);
    auto pre_f = slice_cols(pre, h, 2 * h);
    auto pre_g = slice_cols(pre, 2 * h, 3 * h);
    auto pre_o = slice_cols(pre, 3 * h, 4 * h);
    if (forget_bias_offset != T(0)) {
      T* p = pre_f.data();
      for (int64_t k = 0; k < pre_f.numel(); ++k) p[k] += forget_bias_offset;
    }
    auto gi = sigmoid_map(pre_i);
    auto gf = sigmoid_map(pre_f);
    auto gg = tanh_map(pre_g);
    auto go = sigmoid_map(pre_o);

    LstmState<T> out;
    out.c = add(mul(gf, state.c), mul(gi, gg));
    auto tc = tanh_map(out.c);
    out.h = mul(go, tc);
    if (cache) {
      cache->tag = this;
      cache->z = std::move(z);
      cache->gi = std::move(gi);
      cache->gf = std::move(gf);
      cache->gg = std::move(gg);
      cache->go = std::move(go);
      cache->c_prev = state.c;
      cache->tanh_c_new = std::move(tc);
    }
    return out;
  }

  LstmGrads<T> backward(const LstmCache<T>& cache, const Tensor<T>& dh, const Tensor<T>& dc) const {
    detail::check_cache_tag(cache.tag, this, "lstm");
    const int64_t B = cache.z.rows(), h = hidden_;
    if (!dh.same_shape(dc) || dh.rows() != B || dh.cols() != h)
      throw DimensionError("lstm backward: state grad shape mismatch");

    Tensor<T> dpre({B, 4 * h});
    Tensor<T> dc_prev({B, h});
    const T* pdh = dh.data();
    const T* pdc = dc.data();
    for (int64_t r = 0; r < B; ++r) {
      for (int64_t k = 0; k < h; ++k) {
        const int64_t idx = r * h + k;
        const T gi = cache.gi.at(idx), gf = cache.gf.at(idx), gg = cache.gg.at(idx), go = cache.go.at(idx);
        const T tc = cache.tanh_c_new.at(idx);
        const T dct = pdc[idx] + pdh[idx] * go * (T(1) - tc * tc);
        const T di = dct * gg;
        const T df = dct * cache.c_prev.at(idx);
        const T dg = dct * gi;
        const T dout = pdh[idx] * tc;
        dc_prev.at(idx) = dct * gf;
        T* row = dpre.data() + r * 4 * h;
        row[k] = di * gi * (T(1) - gi);
        row[h + k] = df * gf * (T(1) - gf);
        row[2 * h + k] = dg * (T(1) - gg * gg);
        row[3 * h + k] = dout * go * (T(1) - go);
      }
    }

    LstmGrads<T> g;
    g.weight = matmul(transpose(dpre), cache.z);
    apply_mask_to_gradient(g.weight, gate_weight.mask);
    g.bias = colsum(dpre);
    auto dz = matmul(dpre, eff_w_);
    g.input = slice_cols(dz, 0, input_);
    g.h_prev = slice_cols(dz, input_, input_ + h);
    g.c_prev = std::move(dc_prev);
    return g;
  }

 private:
  Tensor<T> eff_w_;
  Tensor<T> eff_w_t_;
  int64_t input_ = 0;
  int64_t hidden_ = 0;
};

// ---------------------------------------------------------------------------
// Embedding: row lookup into a masked [vocab x dim] table.
// ---------------------------------------------------------------------------
template <typename T>
struct EmbeddingCache {
  const void* tag = nullptr;
  std::vector<int32_t> ids;
};

template <typename T>
class EmbeddingLayer {
 public:
  MaskedParameter<T> table;  // [vocab x dim]

  EmbeddingLayer() = default;
  EmbeddingLayer(std::string name, Tensor<T> t) : table(std::move(name), std::move(t)) { refresh_effective(); }

  int64_t vocab() const { return table.values.rows(); }
  int64_t dim() const { return table.values.cols(); }

  void refresh_effective() { eff_ = table.effective(); }

  Tensor<T> forward(const std::vector<int32_t>& ids, EmbeddingCache<T>* cache = nullptr) const {
    Tensor<T> out({int64_t(ids.size()), dim()});
    for (size_t r = 0; r < ids.size(); ++r) {
      int32_t id = ids[r];
      if (id < 0 || int64_t(id) >= vocab())
        throw IndexError("embedding: id " + std::to_string(id) + " out of range [0, " + std::to_string(vocab()) + ")");
      std::memcpy(out.data() + int64_t(r) * dim(), eff_.data() + int64_t(id) * dim(), size_t(dim()) * sizeof(T));
    }
    if (cache) {
      cache->tag = this;
      cache->ids = ids;
    }
    return out;
  }

  // Scatter-add of the output gradient rows, then masked.
  Tensor<T> backward(const EmbeddingCache<T>& cache, const Tensor<T>& dy) const {
    Tensor<T> dt({vocab(), dim()});
    accumulate_backward(cache, dy, dt);
    apply_mask_to_gradient(dt, table.mask);
    return dt;
  }

  // Unmasked scatter-add into an accumulator; callers that sum over many
  // lookups apply the mask once at the end.
  void accumulate_backward(const EmbeddingCache<T>& cache, const Tensor<T>& dy, Tensor<T>& acc) const {
    detail::check_cache_tag(cache.tag, this, "embedding");
    if (dy.rank() != 2 || dy.rows() != int64_t(cache.ids.size()) || dy.cols() != dim())
      throw DimensionError("embedding backward: grad " + shape_str(dy.shape()) + " does not match cache");
    if (!acc.same_shape(table.values)) throw DimensionError("embedding backward: accumulator shape mismatch");
    for (size_t r = 0; r < cache.ids.size(); ++r) {
      T* dst = acc.data() + int64_t(cache.ids[r]) * dim();
      const T* src = dy.data() + int64_t(r) * dim();
      for (int64_t k = 0; k < dim(); ++k) dst[k] += src[k];
    }
  }

 private:
  Tensor<T> eff_;
};

// ---------------------------------------------------------------------------
// Softmax cross-entropy head: logits = hidden P_eff^T + b over a masked
// projection [vocab x dim]. Loss is the mean negative log probability of the
// targets; d(loss)/d(logits) = (softmax - onehot) / N.
// ---------------------------------------------------------------------------
template <typename T>
struct SoftmaxXentCache {
  const void* tag = nullptr;
  Tensor<T> hidden;
  Tensor<T> softmax;
  std::vector<int32_t> targets;
};

template <typename T>
struct SoftmaxXentGrads {
  Tensor<T> hidden;
  Tensor<T> projection;
  Tensor<T> bias;
};

template <typename T>
class SoftmaxXentHead {
 public:
  MaskedParameter<T> projection;  // [vocab x dim]
  Tensor<T> bias;                 // [vocab]

  SoftmaxXentHead() = default;
  SoftmaxXentHead(std::string name, Tensor<T> proj, Tensor<T> b)
      : projection(std::move(name), std::move(proj)), bias(std::move(b)) {
    refresh_effective();
  }

  int64_t vocab() const { return projection.values.rows(); }
  int64_t dim() const { return projection.values.cols(); }

  void refresh_effective() {
    eff_p_ = projection.effective();
    eff_p_t_ = transpose(eff_p_);
  }

  Tensor<T> logits(const Tensor<T>& hidden) const {
    auto l = matmul(hidden, eff_p_t_);
    add_row_vector_inplace(l, bias);
    return l;
  }

  // Row-stable softmax of the logits; rows sum to 1 up to rounding.
  Tensor<T> probabilities(const Tensor<T>& hidden) const {
    auto l = logits(hidden);
    softmax_rows_inplace(l);
    return l;
  }

  double forward_loss(const Tensor<T>& hidden, const std::vector<int32_t>& targets,
                      SoftmaxXentCache<T>* cache = nullptr) const {
    if (hidden.rank() != 2 || hidden.cols() != dim())
      throw DimensionError("softmax head: hidden " + shape_str(hidden.shape()) + " does not match projection " +
                           shape_str(projection.values.shape()));
    if (int64_t(targets.size()) != hidden.rows())
      throw DimensionError("softmax head: target count does not match hidden rows");
    for (int32_t t : targets)
      if (t < 0 || int64_t(t) >= vocab())
        throw IndexError("softmax head: target " + std::to_string(t) + " out of range [0, " + std::to_string(vocab()) +
                         ")");
    auto l = logits(hidden);
    const int64_t N = l.rows(), V = vocab();
    double nll_sum = 0.0;
    for (int64_t r = 0; r < N; ++r) {
      T* row = l.data() + r * V;
      T mx = row[0];
      for (int64_t j = 1; j < V; ++j) mx = std::max(mx, row[j]);
      double denom = 0.0;
      for (int64_t j = 0; j < V; ++j) denom += std::exp(double(row[j] - mx));
      nll_sum -= double(row[targets[size_t(r)]] - mx) - std::log(denom);
      // reuse the logits buffer to hold the softmax row
      for (int64_t j = 0; j < V; ++j) row[j] = T(std::exp(double(row[j] - mx)) / denom);
    }
    if (cache) {
      cache->tag = this;
      cache->hidden = hidden;
      cache->softmax = std::move(l);
      cache->targets = targets;
    }
    return nll_sum / double(N);
  }

  SoftmaxXentGrads<T> backward(const SoftmaxXentCache<T>& cache) const {
    detail::check_cache_tag(cache.tag, this, "softmax head");
    const int64_t N = cache.softmax.rows(), V = vocab();
    Tensor<T> dlogits = cache.softmax;
    T* p = dlogits.data();
    const T invn = T(1) / T(N);
    for (int64_t r = 0; r < N; ++r) {
      p[r * V + cache.targets[size_t(r)]] -= T(1);
      for (int64_t j = 0; j < V; ++j) p[r * V + j] *= invn;
    }
    SoftmaxXentGrads<T> g;
    g.hidden = matmul(dlogits, eff_p_);
    g.projection = matmul(transpose(dlogits), cache.hidden);
    apply_mask_to_gradient(g.projection, projection.mask);
    g.bias = colsum(dlogits);
    return g;
  }

 private:
  void softmax_rows_inplace(Tensor<T>& l) const {
    const int64_t N = l.rows(), V = l.cols();
    for (int64_t r = 0; r < N; ++r) {
      T* row = l.data() + r * V;
      T mx = row[0];
      for (int64_t j = 1; j < V; ++j) mx = std::max(mx, row[j]);
      double denom = 0.0;
      for (int64_t j = 0; j < V; ++j) denom += std::exp(double(row[j] - mx));
      for (int64_t j = 0; j < V; ++j) row[j] = T(std::exp(double(row[j] - mx)) / denom);
    }
  }

  Tensor<T> eff_p_;
  Tensor<T> eff_p_t_;
};

}  // namespace pruneforge
