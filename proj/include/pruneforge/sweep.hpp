// The large-sparse vs small-dense comparison harness: a grid of dense
// variants (width multipliers / hidden-size presets) and sparse variants
// (sparsity targets on the largest model), each run across every seed, with
// per-run rows and mean +/- stddev aggregation.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pruneforge/config.hpp"
#include "pruneforge/sparse_format.hpp"

namespace pruneforge {

struct SweepRow {
  std::string variant;
  uint64_t seed = 0;
  double sparsity = 0;  // commanded final sparsity, 0 for dense variants
  int64_t nnz_params = 0;
  int64_t total_params = 0;
  double metric = 0;
  int64_t bytes_dense = 0;    // every tensor stored raw
  int64_t bytes_bitmask = 0;  // prunable tensors in bit-mask form
  int64_t bytes_csrc = 0;     // prunable tensors in CSR(C) form (padding included)
  int64_t bytes_best = 0;     // per-tensor minimum of the three
};

struct SweepResult {
  std::string metric_name;
  bool higher_better = true;
  std::vector<SweepRow> rows;  // sorted by (variant, seed)
};

SweepResult run_compare_sweep(const ExperimentConfig& cfg,
                              const std::function<void(const std::string&)>& log = {});

std::string sweep_runs_csv(const SweepResult& r);
std::string sweep_summary_csv(const SweepResult& r);

// Byte accounting for a trained model's parameter slots with 4-byte values
// and 4-bit CSR(C) counts.
template <typename T>
void model_storage_bytes(std::vector<ParamSlot<T>>& slots, SweepRow& row) {
  const int bpe = 4, cb = 4;
  row.bytes_dense = row.bytes_bitmask = row.bytes_csrc = row.bytes_best = 0;
  for (auto& s : slots) {
    const int64_t numel = s.values->numel();
    const int64_t raw = numel * bpe;
    if (!s.owner) {  // never-pruned parameters are stored raw everywhere
      row.bytes_dense += raw;
      row.bytes_bitmask += raw;
      row.bytes_csrc += raw;
      row.bytes_best += raw;
      continue;
    }
    const int64_t nnz = s.owner->mask.count_ones();
    const int64_t bitmask_bytes = nnz * bpe + (numel + 7) / 8;
    const auto eff = s.owner->effective();
    const int64_t padded = csrc_entry_count(eff, cb);
    const int64_t csrc_bytes = padded * bpe + (padded * cb + 7) / 8;
    row.bytes_dense += raw;
    row.bytes_bitmask += bitmask_bytes;
    row.bytes_csrc += csrc_bytes;
    row.bytes_best += std::min({raw, bitmask_bytes, csrc_bytes});
  }
}

}  // namespace pruneforge
