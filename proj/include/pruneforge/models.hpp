// Desk-scale model zoo: width-multiplied MLP classifiers on a teacher-student
// task and a 2-layer character LSTM language model, each packaged as a Task
// the trainer can drive.
#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pruneforge/corpus.hpp"
#include "pruneforge/layers.hpp"
#include "pruneforge/train.hpp"

namespace pruneforge {

inline double perplexity(double mean_nll) { return std::exp(mean_nll); }

template <typename T>
int64_t total_param_count(const std::vector<ParamSlot<T>>& slots) {
  int64_t n = 0;
  for (const auto& s : slots) n += s.values->numel();
  return n;
}

// Unmasked weights plus every never-pruned parameter.
template <typename T>
int64_t nnz_param_count(const std::vector<ParamSlot<T>>& slots) {
  int64_t n = 0;
  for (const auto& s : slots) n += s.owner ? s.owner->mask.count_ones() : s.values->numel();
  return n;
}

struct EvalReport {
  double metric = 0;
  int64_t nnz_params = 0;
  int64_t total_params = 0;
};

// ---------------------------------------------------------------------------
// MLP with tanh hidden layers and a softmax head. All weight matrices
// (including the head projection) are prunable; biases never are.
// ---------------------------------------------------------------------------
struct MlpConfig {
  int64_t input_dim = 0;
  std::vector<int64_t> hidden_widths;  // widths at alpha = 1.0
  double width_multiplier = 1.0;       // alpha
  int64_t output_dim = 0;

  std::vector<int64_t> scaled_widths() const {
    std::vector<int64_t> out;
    out.reserve(hidden_widths.size());
    for (int64_t w : hidden_widths)
      out.push_back(std::max<int64_t>(1, int64_t(std::llround(width_multiplier * double(w)))));
    return out;
  }
  void validate() const {
    if (input_dim <= 0 || output_dim <= 0) throw ConfigError("mlp config: input/output dims must be positive");
    if (width_multiplier <= 0.0 || width_multiplier > 1.0)
      throw ConfigError("mlp config: width multiplier must lie in (0, 1]");
    for (int64_t w : hidden_widths)
      if (w <= 0) throw ConfigError("mlp config: hidden widths must be positive");
  }
};

template <typename T>
class MlpModel {
 public:
  MlpModel(const MlpConfig& cfg, SeededRng& rng) : cfg_(cfg) {
    cfg.validate();
    int64_t in = cfg.input_dim;
    int idx = 0;
    for (int64_t w : cfg.scaled_widths()) {
      hidden_.emplace_back("fc" + std::to_string(idx) + ".w",
                           uniform_init<T>({w, in}, 1.0 / std::sqrt(double(in)), rng), Tensor<T>::zeros({w}));
      in = w;
      ++idx;
    }
    head_ = SoftmaxXentHead<T>("head.proj", uniform_init<T>({cfg.output_dim, in}, 1.0 / std::sqrt(double(in)), rng),
                               Tensor<T>::zeros({cfg.output_dim}));
  }

  const MlpConfig& config() const { return cfg_; }

  std::vector<ParamSlot<T>> param_slots() {
    std::vector<ParamSlot<T>> slots;
    for (size_t l = 0; l < hidden_.size(); ++l) {
      slots.push_back({hidden_[l].weight.name, &hidden_[l].weight.values, &hidden_[l].weight});
      slots.push_back({"fc" + std::to_string(l) + ".b", &hidden_[l].bias, nullptr});
    }
    slots.push_back({head_.projection.name, &head_.projection.values, &head_.projection});
    slots.push_back({"head.b", &head_.bias, nullptr});
    return slots;
  }

  std::vector<MaskedParameter<T>*> prunable_params() {
    std::vector<MaskedParameter<T>*> out;
    for (auto& l : hidden_) out.push_back(&l.weight);
    out.push_back(&head_.projection);
    return out;
  }

  void refresh_effective() {
    for (auto& l : hidden_) l.refresh_effective();
    head_.refresh_effective();
  }

  int64_t total_params() {
    auto slots = param_slots();
    return total_param_count(slots);
  }
  int64_t nnz_params() {
    auto slots = param_slots();
    return nnz_param_count(slots);
  }

  Tensor<T> logits(const Tensor<T>& x) const {
    Tensor<T> act = x;
    for (const auto& l : hidden_) act = tanh_map(l.forward(act));
    return head_.logits(act);
  }

  Tensor<T> probabilities(const Tensor<T>& x) const {
    Tensor<T> act = x;
    for (const auto& l : hidden_) act = tanh_map(l.forward(act));
    return head_.probabilities(act);
  }

  // grads are ordered exactly as param_slots().
  double loss_and_grads(const Tensor<T>& x, const std::vector<int32_t>& targets, std::vector<Tensor<T>>& grads) {
    const size_t L = hidden_.size();
    std::vector<LinearCache<T>> caches(L);
    std::vector<Tensor<T>> acts(L);  // tanh outputs per hidden layer
    Tensor<T> act = x;
    for (size_t l = 0; l < L; ++l) {
      act = tanh_map(hidden_[l].forward(act, &caches[l]));
      acts[l] = act;
    }
    SoftmaxXentCache<T> hcache;
    const double loss = head_.forward_loss(act, targets, &hcache);
    auto hg = head_.backward(hcache);

    grads.assign(2 * L + 2, Tensor<T>());
    grads[2 * L] = std::move(hg.projection);
    grads[2 * L + 1] = std::move(hg.bias);

    Tensor<T> d = std::move(hg.hidden);
    for (size_t l = L; l-- > 0;) {
      // through tanh: d *= 1 - act^2
      T* pd = d.data();
      const T* pa = acts[l].data();
      for (int64_t i = 0; i < d.numel(); ++i) pd[i] *= T(1) - pa[i] * pa[i];
      auto g = hidden_[l].backward(caches[l], d);
      grads[2 * l] = std::move(g.weight);
      grads[2 * l + 1] = std::move(g.bias);
      d = std::move(g.input);
    }
    return loss;
  }

  double accuracy(const Tensor<T>& x, const std::vector<int32_t>& targets) const {
    auto l = logits(x);
    int64_t hits = 0;
    for (int64_t r = 0; r < l.rows(); ++r) {
      int64_t best = 0;
      for (int64_t j = 1; j < l.cols(); ++j)
        if (l(r, j) > l(r, best)) best = j;
      if (best == targets[size_t(r)]) ++hits;
    }
    return double(hits) / double(l.rows());
  }

 private:
  MlpConfig cfg_;
  std::vector<LinearLayer<T>> hidden_;
  SoftmaxXentHead<T> head_;
};

// ---------------------------------------------------------------------------
// Teacher-student classification data: a frozen random MLP labels uniform
// random inputs by its argmax class. Bitwise regenerable from the seed.
// ---------------------------------------------------------------------------
template <typename T>
struct TeacherDataset {
  Tensor<T> train_x{{1, 1}};
  Tensor<T> val_x{{1, 1}};
  std::vector<int32_t> train_y, val_y;

  static TeacherDataset make(uint64_t seed, const MlpConfig& teacher_arch, int64_t n_train, int64_t n_val) {
    SeededRng rng(seed);
    MlpModel<T> teacher(teacher_arch, rng);
    TeacherDataset d;
    d.train_x = uniform_init<T>({n_train, teacher_arch.input_dim}, 1.0, rng);
    d.val_x = uniform_init<T>({n_val, teacher_arch.input_dim}, 1.0, rng);
    d.train_y = label_with(teacher, d.train_x);
    d.val_y = label_with(teacher, d.val_x);
    return d;
  }

 private:
  static std::vector<int32_t> label_with(const MlpModel<T>& teacher, const Tensor<T>& x) {
    auto l = teacher.logits(x);
    std::vector<int32_t> y(size_t(l.rows()), 0);
    for (int64_t r = 0; r < l.rows(); ++r) {
      int64_t best = 0;
      for (int64_t j = 1; j < l.cols(); ++j)
        if (l(r, j) > l(r, best)) best = j;
      y[size_t(r)] = int32_t(best);
    }
    return y;
  }
};

// Dataset cache files reuse the checkpoint container: two f32 tensors for
// the inputs and two u64-payload entries for the labels.
template <typename T>
Checkpoint dataset_to_cache(const TeacherDataset<T>& d) {
  Checkpoint ckpt;
  ckpt.put_tensor("train_x", CkptKind::TensorData, d.train_x);
  ckpt.put_tensor("val_x", CkptKind::TensorData, d.val_x);
  auto put_labels = [&](const std::string& name, const std::vector<int32_t>& ys) {
    CkptEntry e;
    e.name = name;
    e.kind = uint8_t(CkptKind::TensorData);
    e.dtype = kCkptDtypeU64;
    e.dims.push_back(uint64_t(ys.size()));
    e.payload.resize(ys.size() * 8);
    for (size_t i = 0; i < ys.size(); ++i) {
      uint64_t v = uint64_t(ys[i]);
      for (int b = 0; b < 8; ++b) e.payload[i * 8 + size_t(b)] = uint8_t(v >> (8 * b));
    }
    ckpt.entries.push_back(std::move(e));
  };
  put_labels("train_y", d.train_y);
  put_labels("val_y", d.val_y);
  return ckpt;
}

template <typename T>
TeacherDataset<T> dataset_from_cache(const Checkpoint& ckpt) {
  TeacherDataset<T> d;
  d.train_x = ckpt.template get_tensor<T>("train_x");
  d.val_x = ckpt.template get_tensor<T>("val_x");
  auto get_labels = [&](const std::string& name) {
    const CkptEntry* e = ckpt.find(name);
    if (!e || e->dtype != kCkptDtypeU64) throw IoError("dataset cache: missing label entry '" + name + "'");
    std::vector<int32_t> ys(size_t(e->elem_count()), 0);
    for (size_t i = 0; i < ys.size(); ++i) {
      uint64_t v = 0;
      for (int b = 0; b < 8; ++b) v |= uint64_t(e->payload[i * 8 + size_t(b)]) << (8 * b);
      ys[i] = int32_t(v);
    }
    return ys;
  };
  d.train_y = get_labels("train_y");
  d.val_y = get_labels("val_y");
  return d;
}

template <typename T>
struct MlpTask {
  using Scalar = T;

  MlpModel<T> model;
  const TeacherDataset<T>* data = nullptr;
  int64_t batch = 32;

  MlpTask(const MlpConfig& cfg, SeededRng& rng, const TeacherDataset<T>* d, int64_t batch_size)
      : model(cfg, rng), data(d), batch(batch_size) {}

  std::vector<ParamSlot<T>> param_slots() { return model.param_slots(); }
  std::vector<MaskedParameter<T>*> prunable_params() { return model.prunable_params(); }
  void refresh_effective() { model.refresh_effective(); }

  double sample_loss_and_grads(SeededRng& rng, std::vector<Tensor<T>>& grads) {
    const int64_t n = data->train_x.rows(), in = data->train_x.cols();
    Tensor<T> x({batch, in});
    std::vector<int32_t> y(size_t(batch), 0);
    for (int64_t b = 0; b < batch; ++b) {
      int64_t idx = int64_t(rng.next_below(uint64_t(n)));
      std::memcpy(x.data() + b * in, data->train_x.data() + idx * in, size_t(in) * sizeof(T));
      y[size_t(b)] = data->train_y[size_t(idx)];
    }
    return model.loss_and_grads(x, y, grads);
  }

  double eval_metric() { return model.accuracy(data->val_x, data->val_y); }
  double final_metric() { return eval_metric(); }
  const char* metric_name() const { return "accuracy"; }
  bool metric_higher_better() const { return true; }

  EvalReport evaluate_validation() {
    return EvalReport{final_metric(), model.nnz_params(), model.total_params()};
  }
};

// ---------------------------------------------------------------------------
// Character LSTM language model: embedding -> 2 LSTM layers -> softmax head,
// embedding dim tied to the hidden size. Embedding, both gate matrices and
// the softmax projection are prunable.
// ---------------------------------------------------------------------------
struct LstmLmConfig {
  int64_t vocab = 0;
  int64_t hidden = 0;
  int64_t num_layers = 2;
  int64_t seq_len = 32;
  int64_t batch = 16;

  void validate() const {
    if (vocab <= 0 || hidden <= 0) throw ConfigError("lstm config: vocab and hidden must be positive");
    if (num_layers != 2) throw ConfigError("lstm config: this model is fixed at 2 LSTM layers");
    if (seq_len <= 0 || batch <= 0) throw ConfigError("lstm config: seq_len and batch must be positive");
  }
};

// Desk presets: small/medium/large hidden sizes 64/128/256.
int64_t lstm_preset_hidden(const std::string& name);

template <typename T>
class LstmLmModel {
 public:
  LstmLmModel(const LstmLmConfig& cfg, SeededRng& rng) : cfg_(cfg) {
    cfg.validate();
    const double r = 0.05;
    const int64_t h = cfg.hidden, V = cfg.vocab;
    emb_ = EmbeddingLayer<T>("emb.table", uniform_init<T>({V, h}, r, rng));
    for (int64_t l = 0; l < cfg.num_layers; ++l)
      cells_.emplace_back("lstm" + std::to_string(l) + ".w", uniform_init<T>({4 * h, 2 * h}, r, rng),
                          Tensor<T>::zeros({4 * h}), T(1));
    head_ = SoftmaxXentHead<T>("head.proj", uniform_init<T>({V, h}, r, rng), Tensor<T>::zeros({V}));
  }

  const LstmLmConfig& config() const { return cfg_; }

  std::vector<ParamSlot<T>> param_slots() {
    std::vector<ParamSlot<T>> slots;
    slots.push_back({emb_.table.name, &emb_.table.values, &emb_.table});
    for (size_t l = 0; l < cells_.size(); ++l) {
      slots.push_back({cells_[l].gate_weight.name, &cells_[l].gate_weight.values, &cells_[l].gate_weight});
      slots.push_back({"lstm" + std::to_string(l) + ".b", &cells_[l].gate_bias, nullptr});
    }
    slots.push_back({head_.projection.name, &head_.projection.values, &head_.projection});
    slots.push_back({"head.b", &head_.bias, nullptr});
    return slots;
  }

  std::vector<MaskedParameter<T>*> prunable_params() {
    std::vector<MaskedParameter<T>*> out{&emb_.table};
    for (auto& c : cells_) out.push_back(&c.gate_weight);
    out.push_back(&head_.projection);
    return out;
  }

  void refresh_effective() {
    emb_.refresh_effective();
    for (auto& c : cells_) c.refresh_effective();
    head_.refresh_effective();
  }

  int64_t total_params() {
    auto slots = param_slots();
    return total_param_count(slots);
  }
  int64_t nnz_params() {
    auto slots = param_slots();
    return nnz_param_count(slots);
  }

  // windows: [B x (T+1)] token ids, row-major; inputs are columns [0, T),
  // targets are columns [1, T+1). grads ordered as param_slots().
  double loss_and_grads(const std::vector<int32_t>& windows, int64_t B, std::vector<Tensor<T>>& grads) {
    const int64_t T_ = cfg_.seq_len, h = cfg_.hidden;
    if (int64_t(windows.size()) != B * (T_ + 1)) throw DimensionError("lm windows: wrong extent");

    std::vector<std::vector<LstmCache<T>>> caches(cells_.size());
    for (auto& c : caches) c.resize(size_t(T_));
    std::vector<EmbeddingCache<T>> ecaches(static_cast<size_t>(T_));
    std::vector<LstmState<T>> states;
    for (size_t l = 0; l < cells_.size(); ++l) states.push_back(LstmState<T>::zero(B, h));

    Tensor<T> big_hidden({B * T_, h});
    std::vector<int32_t> big_targets(size_t(B * T_), 0);
    std::vector<int32_t> ids(size_t(B), 0);
    for (int64_t t = 0; t < T_; ++t) {
      for (int64_t b = 0; b < B; ++b) {
        ids[size_t(b)] = windows[size_t(b * (T_ + 1) + t)];
        big_targets[size_t(t * B + b)] = windows[size_t(b * (T_ + 1) + t + 1)];
      }
      Tensor<T> x = emb_.forward(ids, &ecaches[size_t(t)]);
      for (size_t l = 0; l < cells_.size(); ++l) {
        states[l] = cells_[l].forward(x, states[l], &caches[l][size_t(t)]);
        x = states[l].h;
      }
      std::memcpy(big_hidden.data() + t * B * h, x.data(), size_t(B * h) * sizeof(T));
    }

    SoftmaxXentCache<T> hcache;
    const double loss = head_.forward_loss(big_hidden, big_targets, &hcache);
    auto hg = head_.backward(hcache);

    // grads: emb, (cell w, cell b) x L, head proj, head bias
    const size_t L = cells_.size();
    grads.assign(2 * L + 3, Tensor<T>());
    Tensor<T> demb(emb_.table.values.shape());
    std::vector<Tensor<T>> dW(L), db(L);
    for (size_t l = 0; l < L; ++l) {
      dW[l] = Tensor<T>::zeros(cells_[l].gate_weight.values.shape());
      db[l] = Tensor<T>::zeros(cells_[l].gate_bias.shape());
    }
    std::vector<Tensor<T>> dh(L), dc(L);
    for (size_t l = 0; l < L; ++l) {
      dh[l] = Tensor<T>::zeros({B, h});
      dc[l] = Tensor<T>::zeros({B, h});
    }

    for (int64_t t = T_ - 1; t >= 0; --t) {
      // head gradient slice for this timestep + recurrent gradient
      Tensor<T> d_top({B, h});
      std::memcpy(d_top.data(), hg.hidden.data() + t * B * h, size_t(B * h) * sizeof(T));
      for (size_t l = L; l-- > 0;) {
        Tensor<T> dh_total = add(d_top, dh[l]);
        auto g = cells_[l].backward(caches[l][size_t(t)], dh_total, dc[l]);
        add_inplace(dW[l], g.weight);
        add_inplace(db[l], g.bias);
        dh[l] = std::move(g.h_prev);
        dc[l] = std::move(g.c_prev);
        d_top = std::move(g.input);
      }
      emb_.accumulate_backward(ecaches[size_t(t)], d_top, demb);
    }
    apply_mask_to_gradient(demb, emb_.table.mask);
    // per-timestep weight grads were masked already; re-masking the sums is
    // a no-op but keeps the invariant explicit
    for (size_t l = 0; l < L; ++l) apply_mask_to_gradient(dW[l], cells_[l].gate_weight.mask);

    grads[0] = std::move(demb);
    for (size_t l = 0; l < L; ++l) {
      grads[1 + 2 * l] = std::move(dW[l]);
      grads[2 + 2 * l] = std::move(db[l]);
    }
    grads[1 + 2 * L] = std::move(hg.projection);
    grads[2 + 2 * L] = std::move(hg.bias);
    return loss;
  }

  // Mean NLL over non-overlapping windows of the stream; max_windows == 0
  // takes every full window.
  double mean_nll_on(const std::vector<int32_t>& stream, int64_t max_windows = 0) {
    const int64_t T_ = cfg_.seq_len, h = cfg_.hidden;
    std::vector<int64_t> starts;
    for (int64_t s = 0; s + T_ + 1 <= int64_t(stream.size()); s += T_) {
      starts.push_back(s);
      if (max_windows > 0 && int64_t(starts.size()) >= max_windows) break;
    }
    if (starts.empty()) throw ConfigError("lm eval: stream shorter than one window");

    double total = 0;
    int64_t positions = 0;
    for (size_t w0 = 0; w0 < starts.size(); w0 += size_t(cfg_.batch)) {
      const int64_t B = std::min<int64_t>(cfg_.batch, int64_t(starts.size() - w0));
      std::vector<LstmState<T>> states;
      for (size_t l = 0; l < cells_.size(); ++l) states.push_back(LstmState<T>::zero(B, h));
      Tensor<T> big_hidden({B * T_, h});
      std::vector<int32_t> big_targets(size_t(B * T_), 0);
      std::vector<int32_t> ids(size_t(B), 0);
      for (int64_t t = 0; t < T_; ++t) {
        for (int64_t b = 0; b < B; ++b) {
          const int64_t s = starts[w0 + size_t(b)];
          ids[size_t(b)] = stream[size_t(s + t)];
          big_targets[size_t(t * B + b)] = stream[size_t(s + t + 1)];
        }
        Tensor<T> x = emb_.forward(ids);
        for (size_t l = 0; l < cells_.size(); ++l) {
          states[l] = cells_[l].forward(x, states[l]);
          x = states[l].h;
        }
        std::memcpy(big_hidden.data() + t * B * h, x.data(), size_t(B * h) * sizeof(T));
      }
      total += head_.forward_loss(big_hidden, big_targets) * double(B * T_);
      positions += B * T_;
    }
    return total / double(positions);
  }

  SoftmaxXentHead<T>& head() { return head_; }
  EmbeddingLayer<T>& embedding() { return emb_; }
  LstmCell<T>& cell(size_t l) { return cells_[l]; }

 private:
  LstmLmConfig cfg_;
  EmbeddingLayer<T> emb_;
  std::vector<LstmCell<T>> cells_;
  SoftmaxXentHead<T> head_;
};

template <typename T>
struct LmTask {
  using Scalar = T;

  LstmLmModel<T> model;
  const CharCorpus* corpus = nullptr;
  int64_t eval_window_cap = 32;

  LmTask(const LstmLmConfig& cfg, SeededRng& rng, const CharCorpus* c) : model(cfg, rng), corpus(c) {}

  std::vector<ParamSlot<T>> param_slots() { return model.param_slots(); }
  std::vector<MaskedParameter<T>*> prunable_params() { return model.prunable_params(); }
  void refresh_effective() { model.refresh_effective(); }

  double sample_loss_and_grads(SeededRng& rng, std::vector<Tensor<T>>& grads) {
    const int64_t T_ = model.config().seq_len, B = model.config().batch;
    const auto& stream = corpus->train;
    if (int64_t(stream.size()) < T_ + 2) throw ConfigError("lm task: train split too short");
    std::vector<int32_t> windows(size_t(B * (T_ + 1)), 0);
    for (int64_t b = 0; b < B; ++b) {
      const int64_t start = int64_t(rng.next_below(uint64_t(int64_t(stream.size()) - T_ - 1)));
      for (int64_t t = 0; t <= T_; ++t) windows[size_t(b * (T_ + 1) + t)] = stream[size_t(start + t)];
    }
    return model.loss_and_grads(windows, B, grads);
  }

  double eval_metric() { return perplexity(model.mean_nll_on(corpus->valid, eval_window_cap)); }
  double final_metric() { return perplexity(model.mean_nll_on(corpus->valid, 0)); }
  const char* metric_name() const { return "perplexity"; }
  bool metric_higher_better() const { return false; }

  EvalReport evaluate_validation() {
    return EvalReport{final_metric(), model.nnz_params(), model.total_params()};
  }
};

}  // namespace pruneforge
