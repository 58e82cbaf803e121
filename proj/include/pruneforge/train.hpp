// The training loop: masked forward/backward, gradient masking, clipping,
// parameter updates, pruning hooks on the schedule grid, metric tracing and
// bitwise-resumable checkpoints.
//
// A Task bundles a model with its data and exposes:
//   using Scalar = ...;
//   std::vector<ParamSlot<Scalar>> param_slots();
//   std::vector<MaskedParameter<Scalar>*> prunable_params();
//   void refresh_effective();
//   double sample_loss_and_grads(SeededRng&, std::vector<Tensor<Scalar>>&);
//   double eval_metric();            // cheap validation metric for the trace
//   double final_metric();           // full validation metric
//   const char* metric_name();       // "accuracy" | "perplexity"
//   bool metric_higher_better();
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pruneforge/checkpoint.hpp"
#include "pruneforge/optim.hpp"
#include "pruneforge/pruning.hpp"
#include "pruneforge/rng.hpp"

namespace pruneforge {

struct RunConfig {
  int64_t steps = 0;
  int64_t eval_every = 25;
  uint64_t seed = 1;
  OptimizerConfig opt;
  LrSchedule lr;
  std::optional<PruningSchedule> prune;
};

struct TraceRow {
  int64_t step = 0;
  double lr = 0;
  double commanded_sparsity = 0;
  double train_loss = 0;
  double eval_metric = 0;
};

struct MetricsTrace {
  std::string metric_name;
  bool higher_better = true;
  std::vector<TraceRow> rows;
};

std::string trace_to_csv(const MetricsTrace& trace);

struct StepInfo {
  int64_t step = 0;
  bool masks_updated = false;
  double loss = 0;
  double lr = 0;
};
using StepObserver = std::function<void(const StepInfo&)>;

struct TrainResult {
  MetricsTrace trace;
  Checkpoint checkpoint;
  double final_metric = 0;
  double final_train_loss = 0;
};

namespace detail {

template <typename T>
Checkpoint snapshot_state(const std::vector<ParamSlot<T>>& slots, SgdOptimizer<T>& opt, int64_t step,
                          uint64_t rng_state) {
  Checkpoint ckpt;
  for (const auto& s : slots) {
    ckpt.put_tensor(s.name, CkptKind::TensorData, *s.values);
    if (s.owner) ckpt.put_mask(s.name + ".mask", s.owner->mask, s.values->shape());
  }
  if (opt.has_velocity()) {
    auto& vel = opt.velocity();
    for (size_t k = 0; k < slots.size(); ++k) ckpt.put_tensor("opt.v." + slots[k].name, CkptKind::OptState, vel[k]);
  }
  ckpt.put_scalar_u64("step", uint64_t(step));
  ckpt.put_scalar_u64("rng_state", rng_state);
  return ckpt;
}

template <typename T>
void restore_state(const std::vector<ParamSlot<T>>& slots, SgdOptimizer<T>& opt, const Checkpoint& ckpt) {
  for (const auto& s : slots) {
    Tensor<T> t = ckpt.template get_tensor<T>(s.name);
    if (!t.same_shape(*s.values))
      throw IoError("checkpoint: shape mismatch for '" + s.name + "', model has " + shape_str(s.values->shape()) +
                    ", file has " + shape_str(t.shape()));
    *s.values = std::move(t);
    if (s.owner) {
      BitArray m = ckpt.get_mask(s.name + ".mask");
      if (m.size() != s.values->numel()) throw IoError("checkpoint: mask size mismatch for '" + s.name + "'");
      s.owner->mask = std::move(m);
    }
  }
  if (opt.has_velocity()) {
    auto& vel = opt.velocity();
    for (size_t k = 0; k < slots.size(); ++k) vel[k] = ckpt.template get_tensor<T>("opt.v." + slots[k].name);
  }
}

}  // namespace detail

// Runs [start, stop) where start comes from the resume checkpoint (0 when
// none) and stop is cfg.steps unless stop_at trims the run for a mid-run
// snapshot. The pruning horizon is always validated against the full
// cfg.steps so a trimmed run still belongs to a legal schedule.
template <typename Task>
TrainResult run_training(Task& task, const RunConfig& cfg, const StepObserver& observer = {},
                         const Checkpoint* resume = nullptr, std::optional<int64_t> stop_at = std::nullopt) {
  using T = typename Task::Scalar;
  if (cfg.steps <= 0) throw ConfigError("run config: steps must be positive");
  if (cfg.eval_every <= 0) throw ConfigError("run config: eval_every must be positive");
  cfg.opt.validate();
  cfg.lr.validate();
  const int64_t stop = stop_at.value_or(cfg.steps);
  if (stop < 0 || stop > cfg.steps) throw ConfigError("run config: stop_at outside [0, steps]");

  auto slots = task.param_slots();
  auto prunable = task.prunable_params();

  std::optional<GradualPruner> pruner;
  if (cfg.prune) {
    pruner.emplace(*cfg.prune);
    int64_t last = pruner->last_update_step(int64_t(prunable.size()));
    if (last > cfg.steps - 1)
      throw ConfigError("pruning grid extends past end of training (last mask update at step " + std::to_string(last) +
                        ", horizon " + std::to_string(cfg.steps) + ")");
  }

  SgdOptimizer<T> opt(cfg.opt, slots);
  SeededRng rng(cfg.seed);
  int64_t start_step = 0;
  if (resume) {
    detail::restore_state(slots, opt, *resume);
    start_step = int64_t(resume->get_scalar_u64("step"));
    rng.set_state(resume->get_scalar_u64("rng_state"));
    if (pruner) pruner->fast_forward(start_step, int64_t(prunable.size()));
    task.refresh_effective();
  }

  MetricsTrace trace;
  trace.metric_name = task.metric_name();
  trace.higher_better = task.metric_higher_better();

  std::vector<Tensor<T>> grads;
  double last_loss = 0;
  for (int64_t t = start_step; t < stop; ++t) {
    bool masks_updated = false;
    if (pruner && pruner->maybe_prune(t, prunable)) {
      masks_updated = true;
      opt.zero_velocity_at_masked(slots);
      task.refresh_effective();
    }

    const double lr = cfg.lr.at(t);
    grads.clear();
    double loss = task.sample_loss_and_grads(rng, grads);
    if (!std::isfinite(loss))
      throw DivergenceError("training diverged: non-finite loss at step " + std::to_string(t), t);
    last_loss = loss;

    opt.step(slots, grads, lr);
    task.refresh_effective();

    if (observer) observer(StepInfo{t, masks_updated, loss, lr});

    if (t % cfg.eval_every == 0 || t == stop - 1) {
      TraceRow row;
      row.step = t;
      row.lr = lr;
      row.commanded_sparsity = pruner ? pruner->last_commanded() : 0.0;
      row.train_loss = loss;
      row.eval_metric = task.eval_metric();
      trace.rows.push_back(row);
    }
  }

  TrainResult result;
  result.trace = std::move(trace);
  result.final_train_loss = last_loss;
  result.final_metric = task.final_metric();
  result.checkpoint = detail::snapshot_state(slots, opt, stop, rng.state());
  return result;
}

}  // namespace pruneforge
