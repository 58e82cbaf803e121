// SGD with optional momentum, weight decay applied through gradients, global
// gradient-norm clipping, and the learning-rate schedules.
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "pruneforge/pruning.hpp"
#include "pruneforge/tensor.hpp"

namespace pruneforge {

// A named view over one trainable tensor. mask/owner are null for
// never-pruned parameters (biases).
template <typename T>
struct ParamSlot {
  std::string name;
  Tensor<T>* values = nullptr;
  MaskedParameter<T>* owner = nullptr;

  const BitArray* mask() const { return owner ? &owner->mask : nullptr; }
};

enum class OptKind { Sgd, Momentum };

struct OptimizerConfig {
  OptKind kind = OptKind::Sgd;
  double momentum = 0.0;  // mu, used when kind == Momentum
  std::optional<double> clip_norm;
  std::optional<double> weight_decay;  // applied to weight matrices only, never biases
  void validate() const;
};

struct LrSchedule {
  enum class Kind { Constant, ExpDecay, StepDecay };
  Kind kind = Kind::Constant;
  double base = 0.1;   // eta (constant) or eta0
  double rate = 1.0;   // exp-decay rate or step-decay factor
  int64_t every = 1;   // decay period in steps
  int64_t start = 0;   // first decaying step (step decay only)

  double at(int64_t t) const;
  void validate() const;
};

// Scale all gradients by ceiling/g when the global norm g exceeds the
// ceiling; otherwise leave them bitwise untouched. Returns g.
template <typename T>
double clip_global_norm(const std::vector<Tensor<T>*>& grads, double ceiling) {
  if (!(ceiling > 0)) throw ParamError("clip_global_norm: ceiling must be positive");
  double sq = 0.0;
  for (const Tensor<T>* g : grads)
    for (int64_t i = 0; i < g->numel(); ++i) sq += double(g->at(i)) * double(g->at(i));
  const double norm = std::sqrt(sq);
  if (norm > ceiling) {
    const T scale = T(ceiling / norm);
    for (Tensor<T>* g : grads) {
      T* p = g->data();
      for (int64_t i = 0; i < g->numel(); ++i) p[i] *= scale;
    }
  }
  return norm;
}

// Plain SGD / classical momentum: v = mu*v + grad; w -= lr*v. Gradients
// arrive already masked; weight decay is added to the gradient and re-masked
// so masked positions never move.
template <typename T>
class SgdOptimizer {
 public:
  SgdOptimizer(OptimizerConfig cfg, const std::vector<ParamSlot<T>>& slots) : cfg_(cfg) {
    cfg_.validate();
    if (cfg_.kind == OptKind::Momentum)
      for (const auto& s : slots) velocity_.push_back(Tensor<T>::zeros(s.values->shape()));
  }

  const OptimizerConfig& config() const { return cfg_; }
  bool has_velocity() const { return cfg_.kind == OptKind::Momentum; }
  std::vector<Tensor<T>>& velocity() { return velocity_; }

  void step(const std::vector<ParamSlot<T>>& slots, std::vector<Tensor<T>>& grads, double lr) {
    if (grads.size() != slots.size()) throw DimensionError("optimizer step: slot/grad count mismatch");
    if (cfg_.weight_decay && *cfg_.weight_decay != 0.0) {
      const T wd = T(*cfg_.weight_decay);
      for (size_t k = 0; k < slots.size(); ++k) {
        if (!slots[k].owner) continue;  // biases are exempt
        T* g = grads[k].data();
        const T* w = slots[k].values->data();
        for (int64_t i = 0; i < grads[k].numel(); ++i) g[i] += wd * w[i];
        apply_mask_to_gradient(grads[k], slots[k].owner->mask);
      }
    }
    if (cfg_.clip_norm) {
      std::vector<Tensor<T>*> refs;
      refs.reserve(grads.size());
      for (auto& g : grads) refs.push_back(&g);
      clip_global_norm(refs, *cfg_.clip_norm);
    }
    const T eta = T(lr);
    for (size_t k = 0; k < slots.size(); ++k) {
      T* w = slots[k].values->data();
      const T* g = grads[k].data();
      const int64_t n = grads[k].numel();
      if (cfg_.kind == OptKind::Momentum) {
        T* v = velocity_[k].data();
        const T mu = T(cfg_.momentum);
        for (int64_t i = 0; i < n; ++i) {
          v[i] = mu * v[i] + g[i];
          w[i] -= eta * v[i];
        }
      } else {
        for (int64_t i = 0; i < n; ++i) w[i] -= eta * g[i];
      }
    }
  }

  // Called right after a mask update so stale momentum cannot re-move a
  // freshly masked weight.
  void zero_velocity_at_masked(const std::vector<ParamSlot<T>>& slots) {
    if (!has_velocity()) return;
    for (size_t k = 0; k < slots.size(); ++k) {
      const BitArray* m = slots[k].mask();
      if (!m) continue;
      T* v = velocity_[k].data();
      for (int64_t i = 0; i < velocity_[k].numel(); ++i)
        if (!m->get(i)) v[i] = T(0);
    }
  }

 private:
  OptimizerConfig cfg_;
  std::vector<Tensor<T>> velocity_;
};

}  // namespace pruneforge
