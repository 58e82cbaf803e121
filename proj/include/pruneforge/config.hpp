// Experiment configuration: a flat key = value text format (one key per
// line, '#' comments), parsed into the typed run description that drives the
// train and compare commands. The canonical sorted form hashes to the run id.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pruneforge/models.hpp"

namespace pruneforge {

class KvConfig {
 public:
  static KvConfig parse_text(const std::string& text);
  static KvConfig parse_file(const std::string& path);

  bool has(const std::string& key) const { return kv_.count(key) != 0; }
  std::string get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  int64_t get_int(const std::string& key) const;
  int64_t get_int_or(const std::string& key, int64_t fallback) const;
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;
  std::vector<std::string> get_list_or(const std::string& key, std::vector<std::string> fallback = {}) const;
  std::vector<int64_t> get_int_list_or(const std::string& key, std::vector<int64_t> fallback = {}) const;
  std::vector<double> get_double_list_or(const std::string& key, std::vector<double> fallback = {}) const;

  // Sorted "key = value" lines; comments and ordering do not survive, so two
  // files describing the same run canonicalize identically.
  std::string canonical() const;

  // Any key never read by the typed loader is a config error (catches typos).
  void ensure_all_consumed() const;

 private:
  std::map<std::string, std::string> kv_;
  mutable std::set<std::string> consumed_;
};

uint64_t fnv1a64(const std::string& s);

struct ExperimentConfig {
  std::string task;  // "mlp" | "lstm"
  uint64_t seed = 1;
  std::vector<uint64_t> seeds;  // compare sweeps; defaults to {seed}
  int64_t steps = 1000;
  int64_t eval_every = 25;
  int64_t batch = 32;

  // mlp task
  MlpConfig mlp;
  std::vector<int64_t> teacher_hidden;
  uint64_t data_seed = 1234;
  int64_t train_n = 4096;
  int64_t val_n = 1024;

  // lstm task
  std::string corpus_path = "assets/corpus.txt";
  int64_t lstm_hidden = 256;
  int64_t seq_len = 32;
  int64_t eval_window_cap = 32;

  OptimizerConfig opt;
  LrSchedule lr;
  // prune_base always carries the parsed schedule fields so sweeps can derive
  // sparse variants; prune is set only when the base run itself prunes.
  PruningSchedule prune_base;
  std::optional<PruningSchedule> prune;

  // compare sweep
  std::vector<double> sweep_dense_alphas;         // mlp dense family
  std::vector<std::string> sweep_dense_presets;   // lstm dense family
  std::vector<double> sweep_sparse_targets;       // s_f values on the largest model
  int64_t sweep_workers = 1;

  std::string canonical;  // canonical kv text this config came from

  static ExperimentConfig from_kv(const KvConfig& kv);
  static ExperimentConfig from_file(const std::string& path);

  uint64_t run_id() const { return fnv1a64(canonical); }
  RunConfig run_config() const;
  MlpConfig teacher_arch() const;
};

}  // namespace pruneforge
