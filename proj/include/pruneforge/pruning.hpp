// Binary weight masks, the cubic gradual-sparsity schedule and the three
// mask-update schemes (simultaneous, layerwise-constant, global).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pruneforge/common.hpp"
#include "pruneforge/tensor.hpp"

namespace pruneforge {

// A weight tensor plus a same-size binary mask; 1 = active. Forward passes
// must use effective() so that the stored value at a masked position never
// influences the output.
template <typename T>
struct MaskedParameter {
  std::string name;
  Tensor<T> values;
  BitArray mask;
  std::optional<int64_t> last_update_step;

  MaskedParameter() = default;
  MaskedParameter(std::string name_, Tensor<T> values_)
      : name(std::move(name_)), values(std::move(values_)), mask(values.numel(), true) {}

  int64_t numel() const { return values.numel(); }
  int64_t nnz() const { return mask.count_ones(); }

  Tensor<T> effective() const {
    Tensor<T> out(values.shape());
    const T* v = values.data();
    T* o = out.data();
    const int64_t n = values.numel();
    for (int64_t i = 0; i < n; ++i) o[i] = mask.get(i) ? v[i] : T(0);
    return out;
  }
};

enum class PruneScheme { Simultaneous, LayerwiseConstant, Global };

PruneScheme prune_scheme_from_string(const std::string& s);
std::string to_string(PruneScheme s);

// s_t = s_f + (s_i - s_f) * (1 - (t - t0)/(n*dt))^3 on the pruning grid,
// clamped to s_i before t0 and s_f after t0 + n*dt.
struct PruningSchedule {
  double initial_sparsity = 0.0;  // s_i
  double final_sparsity = 0.0;    // s_f
  int64_t start_step = 0;         // t0
  int64_t num_prune_steps = 1;    // n
  int64_t prune_every = 100;      // delta t
  PruneScheme scheme = PruneScheme::Simultaneous;

  int64_t end_step() const { return start_step + num_prune_steps * prune_every; }
  bool on_grid(int64_t t) const {
    return t >= start_step && t <= end_step() && (t - start_step) % prune_every == 0;
  }
  void validate() const;
  double sparsity_at(int64_t t) const;
};

// floor(s * n + 0.5), clamped to [0, n].
int64_t target_zero_count(double sparsity, int64_t n_elems);

// Recompute the mask from scratch: exactly target_zero_count positions are
// masked, chosen as the smallest |value| with ties going to the lower flat
// index. Previously masked positions may revive if their stored value now
// ranks higher.
template <typename T>
void update_mask(MaskedParameter<T>& param, double sparsity, std::optional<int64_t> step = std::nullopt) {
  const int64_t n = param.numel();
  const int64_t z = target_zero_count(sparsity, n);
  param.mask.fill(true);
  if (z > 0) {
    std::vector<int64_t> idx(static_cast<size_t>(n), 0);
    for (int64_t i = 0; i < n; ++i) idx[size_t(i)] = i;
    const T* v = param.values.data();
    auto smaller = [v](int64_t a, int64_t b) {
      double ma = std::fabs(double(v[a])), mb = std::fabs(double(v[b]));
      return ma != mb ? ma < mb : a < b;
    };
    if (z < n) std::nth_element(idx.begin(), idx.begin() + z, idx.end(), smaller);
    for (int64_t i = 0; i < z; ++i) param.mask.set(idx[size_t(i)], false);
  }
  param.last_update_step = step;
}

template <typename T>
void prune_step_simultaneous(std::vector<MaskedParameter<T>*>& params, double sparsity,
                             std::optional<int64_t> step = std::nullopt) {
  for (auto* p : params) update_mask(*p, sparsity, step);
}

// One magnitude ranking across the concatenation of all layers; ties break on
// (layer declaration order, flat index). Per-layer sparsity is emergent.
template <typename T>
void prune_step_global(std::vector<MaskedParameter<T>*>& params, double sparsity,
                       std::optional<int64_t> step = std::nullopt) {
  int64_t total = 0;
  for (auto* p : params) total += p->numel();
  const int64_t z = target_zero_count(sparsity, total);

  struct Entry {
    double mag;
    int32_t layer;
    int64_t idx;
  };
  std::vector<Entry> entries;
  entries.reserve(size_t(total));
  for (size_t l = 0; l < params.size(); ++l) {
    const T* v = params[l]->values.data();
    const int64_t n = params[l]->numel();
    for (int64_t i = 0; i < n; ++i) entries.push_back({std::fabs(double(v[i])), int32_t(l), i});
  }
  auto smaller = [](const Entry& a, const Entry& b) {
    if (a.mag != b.mag) return a.mag < b.mag;
    if (a.layer != b.layer) return a.layer < b.layer;
    return a.idx < b.idx;
  };
  if (z > 0 && z < total) std::nth_element(entries.begin(), entries.begin() + z, entries.end(), smaller);

  for (auto* p : params) {
    p->mask.fill(true);
    p->last_update_step = step;
  }
  for (int64_t i = 0; i < z; ++i) params[size_t(entries[size_t(i)].layer)]->mask.set(entries[size_t(i)].idx, false);
}

// Scheme bookkeeping that survives across steps: freeze flag, the
// round-robin cursor for layerwise-constant pruning and the most recently
// commanded per-layer sparsities.
struct PruneState {
  bool frozen = false;
  int64_t layer_cursor = 0;
  std::vector<double> commanded;
};

// Drives mask updates during training. maybe_prune(t, params) is called once
// per training step and fires on schedule events:
//   Simultaneous/Global: every grid step t0 + k*dt updates all layers.
//   LayerwiseConstant:   each grid interval is subdivided into L sub-steps
//                        spaced max(1, dt/L) apart; each sub-step updates one
//                        layer (round-robin) to the interval's sparsity.
// After the s_f event completes the state freezes and masks never change.
class GradualPruner {
 public:
  explicit GradualPruner(PruningSchedule sched) : sched_(sched) { sched_.validate(); }

  const PruningSchedule& schedule() const { return sched_; }
  const PruneState& state() const { return state_; }
  bool frozen() const { return state_.frozen; }
  double last_commanded() const { return last_commanded_; }
  double commanded_sparsity_at(int64_t t) const { return sched_.sparsity_at(t); }

  // Step index of the last mask update the schedule will ever command, for
  // validating that it fits inside the training horizon.
  int64_t last_update_step(int64_t num_layers) const {
    if (sched_.scheme != PruneScheme::LayerwiseConstant || num_layers <= 1) return sched_.end_step();
    // Replay is needed because overlapping cycles (L * spacing > dt) push
    // later cycle starts forward.
    GradualPruner probe(sched_);
    int64_t last = sched_.start_step;
    for (int64_t t = sched_.start_step; !probe.state_.frozen; ++t) {
      if (probe.advance_layerwise(t, num_layers, nullptr)) last = t;
    }
    return last;
  }

  template <typename T>
  bool maybe_prune(int64_t t, std::vector<MaskedParameter<T>*>& params) {
    if (state_.frozen || params.empty()) return false;
    if (state_.commanded.empty()) state_.commanded.assign(params.size(), 0.0);

    if (sched_.scheme == PruneScheme::LayerwiseConstant) {
      auto apply = [&](int64_t layer, double s) {
        update_mask(*params[size_t(layer)], s, t);
        state_.commanded[size_t(layer)] = s;
        last_commanded_ = s;
      };
      std::function<void(int64_t, double)> fn = apply;
      return advance_layerwise(t, int64_t(params.size()), &fn);
    }

    if (!sched_.on_grid(t)) return false;
    const double s = sched_.sparsity_at(t);
    if (sched_.scheme == PruneScheme::Simultaneous)
      prune_step_simultaneous(params, s, t);
    else
      prune_step_global(params, s, t);
    std::fill(state_.commanded.begin(), state_.commanded.end(), s);
    last_commanded_ = s;
    if (t >= sched_.end_step()) state_.frozen = true;
    return true;
  }

  // Rebuild scheme state as of resume step t without touching any masks.
  // Mask updates fire before the step's forward pass, so events at steps
  // < t have already happened in the run being resumed.
  void fast_forward(int64_t t, int64_t num_layers) {
    state_ = PruneState{};
    last_commanded_ = 0.0;
    if (num_layers <= 0) return;
    state_.commanded.assign(size_t(num_layers), 0.0);
    if (sched_.scheme == PruneScheme::LayerwiseConstant) {
      for (int64_t u = sched_.start_step; u < t && !state_.frozen; ++u) {
        auto record = [&](int64_t layer, double s) {
          state_.commanded[size_t(layer)] = s;
          last_commanded_ = s;
        };
        std::function<void(int64_t, double)> fn = record;
        advance_layerwise(u, num_layers, &fn);
      }
    } else {
      for (int64_t k = 0; k <= sched_.num_prune_steps; ++k) {
        int64_t u = sched_.start_step + k * sched_.prune_every;
        if (u >= t) break;
        last_commanded_ = sched_.sparsity_at(u);
        if (u >= sched_.end_step()) state_.frozen = true;
      }
      std::fill(state_.commanded.begin(), state_.commanded.end(), last_commanded_);
    }
  }

 private:
  int64_t sub_step_spacing(int64_t num_layers) const {
    return std::max<int64_t>(1, sched_.prune_every / std::max<int64_t>(1, num_layers));
  }

  // Shared event walker for the layerwise scheme. Fires the callback (when
  // provided) for the event at step t and advances the cycle state. Returns
  // true if an event fired at t.
  bool advance_layerwise(int64_t t, int64_t num_layers, const std::function<void(int64_t, double)>* fire) {
    if (state_.frozen) return false;
    if (!lw_initialized_) {
      lw_next_event_ = sched_.start_step;
      lw_grid_k_ = 0;
      lw_cycle_pos_ = 0;
      lw_initialized_ = true;
    }
    if (t != lw_next_event_) return false;
    const double s = sched_.sparsity_at(sched_.start_step + lw_grid_k_ * sched_.prune_every);
    if (fire) (*fire)(state_.layer_cursor, s);
    state_.layer_cursor = (state_.layer_cursor + 1) % num_layers;
    ++lw_cycle_pos_;
    if (lw_cycle_pos_ < num_layers) {
      lw_next_event_ = t + sub_step_spacing(num_layers);
    } else {
      lw_cycle_pos_ = 0;
      ++lw_grid_k_;
      if (lw_grid_k_ > sched_.num_prune_steps) {
        state_.frozen = true;
      } else {
        // max() keeps events strictly increasing when L * spacing > dt makes
        // a cycle spill past the next grid step.
        lw_next_event_ = std::max(sched_.start_step + lw_grid_k_ * sched_.prune_every, t + 1);
      }
    }
    return true;
  }

  PruningSchedule sched_;
  PruneState state_;
  double last_commanded_ = 0.0;
  bool lw_initialized_ = false;
  int64_t lw_next_event_ = 0;
  int64_t lw_grid_k_ = 0;
  int64_t lw_cycle_pos_ = 0;
};

// Zero gradient entries at masked positions, exactly.
template <typename T>
void apply_mask_to_gradient(Tensor<T>& grad, const BitArray& mask) {
  if (grad.numel() != mask.size())
    throw DimensionError("apply_mask_to_gradient: gradient has " + std::to_string(grad.numel()) +
                         " elements, mask has " + std::to_string(mask.size()));
  T* g = grad.data();
  const int64_t n = grad.numel();
  for (int64_t i = 0; i < n; ++i)
    if (!mask.get(i)) g[i] = T(0);
}

}  // namespace pruneforge
