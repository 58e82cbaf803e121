#include "pruneforge/config.hpp"

#include <algorithm>

namespace pruneforge {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (pos <= s.size()) {
    size_t c = s.find(',', pos);
    if (c == std::string::npos) c = s.size();
    std::string item = trim(s.substr(pos, c - pos));
    if (!item.empty()) out.push_back(item);
    pos = c + 1;
  }
  return out;
}

int64_t to_int(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    int64_t x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
  }
}

}  // namespace

KvConfig KvConfig::parse_text(const std::string& text) {
  KvConfig cfg;
  size_t pos = 0;
  int lineno = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value', got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    if (cfg.kv_.count(key)) throw ConfigError("config: duplicate key '" + key + "'");
    cfg.kv_[key] = val;
  }
  return cfg;
}

KvConfig KvConfig::parse_file(const std::string& path) { return parse_text(read_file_text(path)); }

std::string KvConfig::get(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw ConfigError("config: missing required key '" + key + "'");
  consumed_.insert(key);
  return it->second;
}

std::string KvConfig::get_or(const std::string& key, const std::string& fallback) const {
  consumed_.insert(key);
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

int64_t KvConfig::get_int(const std::string& key) const { return to_int(key, get(key)); }
int64_t KvConfig::get_int_or(const std::string& key, int64_t fallback) const {
  return has(key) ? get_int(key) : (consumed_.insert(key), fallback);
}
double KvConfig::get_double(const std::string& key) const { return to_double(key, get(key)); }
double KvConfig::get_double_or(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : (consumed_.insert(key), fallback);
}

std::vector<std::string> KvConfig::get_list_or(const std::string& key, std::vector<std::string> fallback) const {
  if (!has(key)) {
    consumed_.insert(key);
    return fallback;
  }
  return split_csv(get(key));
}

std::vector<int64_t> KvConfig::get_int_list_or(const std::string& key, std::vector<int64_t> fallback) const {
  if (!has(key)) {
    consumed_.insert(key);
    return fallback;
  }
  std::vector<int64_t> out;
  for (const auto& s : get_list_or(key)) out.push_back(to_int(key, s));
  return out;
}

std::vector<double> KvConfig::get_double_list_or(const std::string& key, std::vector<double> fallback) const {
  if (!has(key)) {
    consumed_.insert(key);
    return fallback;
  }
  std::vector<double> out;
  for (const auto& s : get_list_or(key)) out.push_back(to_double(key, s));
  return out;
}

std::string KvConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : kv_) out += k + " = " + v + "\n";
  return out;
}

void KvConfig::ensure_all_consumed() const {
  for (const auto& [k, v] : kv_) {
    (void)v;
    if (!consumed_.count(k)) throw ConfigError("config: unknown key '" + k + "'");
  }
}

uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

ExperimentConfig ExperimentConfig::from_kv(const KvConfig& kv) {
  ExperimentConfig cfg;
  cfg.task = kv.get("task");
  if (cfg.task != "mlp" && cfg.task != "lstm") throw ConfigError("config: task must be mlp or lstm");
  cfg.seed = uint64_t(kv.get_int_or("seed", 1));
  for (int64_t s : kv.get_int_list_or("seeds", {int64_t(cfg.seed)})) cfg.seeds.push_back(uint64_t(s));
  cfg.steps = kv.get_int("steps");
  cfg.eval_every = kv.get_int_or("eval_every", 25);
  cfg.batch = kv.get_int_or("batch", 32);

  cfg.mlp.input_dim = kv.get_int_or("mlp.input_dim", 32);
  cfg.mlp.hidden_widths = kv.get_int_list_or("mlp.hidden", {64, 64});
  cfg.mlp.output_dim = kv.get_int_or("mlp.output_dim", 10);
  cfg.mlp.width_multiplier = kv.get_double_or("mlp.alpha", 1.0);
  cfg.teacher_hidden = kv.get_int_list_or("data.teacher_hidden", cfg.mlp.hidden_widths);
  cfg.data_seed = uint64_t(kv.get_int_or("data.seed", 1234));
  cfg.train_n = kv.get_int_or("data.train_n", 4096);
  cfg.val_n = kv.get_int_or("data.val_n", 1024);

  cfg.corpus_path = kv.get_or("data.corpus", "assets/corpus.txt");
  if (kv.has("lstm.preset"))
    cfg.lstm_hidden = lstm_preset_hidden(kv.get("lstm.preset"));
  else
    cfg.lstm_hidden = kv.get_int_or("lstm.hidden", 256);
  cfg.seq_len = kv.get_int_or("lstm.seq_len", 32);
  cfg.eval_window_cap = kv.get_int_or("lstm.eval_window_cap", 32);

  std::string opt_kind = kv.get_or("opt.kind", "momentum");
  if (opt_kind == "sgd")
    cfg.opt.kind = OptKind::Sgd;
  else if (opt_kind == "momentum")
    cfg.opt.kind = OptKind::Momentum;
  else
    throw ConfigError("config: opt.kind must be sgd or momentum");
  cfg.opt.momentum = kv.get_double_or("opt.momentum", 0.9);
  if (kv.has("opt.clip_norm")) cfg.opt.clip_norm = kv.get_double("opt.clip_norm");
  if (kv.has("opt.weight_decay")) cfg.opt.weight_decay = kv.get_double("opt.weight_decay");
  cfg.opt.validate();

  std::string lr_kind = kv.get_or("lr.kind", "constant");
  if (lr_kind == "constant")
    cfg.lr.kind = LrSchedule::Kind::Constant;
  else if (lr_kind == "exp")
    cfg.lr.kind = LrSchedule::Kind::ExpDecay;
  else if (lr_kind == "step")
    cfg.lr.kind = LrSchedule::Kind::StepDecay;
  else
    throw ConfigError("config: lr.kind must be constant, exp or step");
  cfg.lr.base = kv.get_double_or("lr.base", 0.1);
  cfg.lr.rate = kv.get_double_or("lr.rate", 0.5);
  cfg.lr.every = kv.get_int_or("lr.every", 1000);
  cfg.lr.start = kv.get_int_or("lr.start", 0);
  cfg.lr.validate();

  cfg.prune_base.initial_sparsity = kv.get_double_or("prune.s_i", 0.0);
  cfg.prune_base.final_sparsity = kv.get_double_or("prune.s_f", 0.0);
  // default warm-up: one tenth of the horizon
  cfg.prune_base.start_step = kv.get_int_or("prune.t0", cfg.steps / 10);
  cfg.prune_base.num_prune_steps = kv.get_int_or("prune.n", 10);
  cfg.prune_base.prune_every = kv.get_int_or("prune.dt", 100);
  cfg.prune_base.scheme = prune_scheme_from_string(kv.get_or("prune.scheme", "simultaneous"));
  cfg.prune_base.validate();
  const bool prune_enabled = kv.get_or("prune.enabled", kv.has("prune.s_f") ? "true" : "false") == "true";
  if (prune_enabled) cfg.prune = cfg.prune_base;

  cfg.sweep_dense_alphas = kv.get_double_list_or("sweep.dense_alphas");
  cfg.sweep_dense_presets = kv.get_list_or("sweep.dense_presets");
  cfg.sweep_sparse_targets = kv.get_double_list_or("sweep.sparse_targets");
  cfg.sweep_workers = kv.get_int_or("sweep.workers", 1);

  kv.ensure_all_consumed();
  cfg.canonical = kv.canonical();
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  return from_kv(KvConfig::parse_file(path));
}

RunConfig ExperimentConfig::run_config() const {
  RunConfig rc;
  rc.steps = steps;
  rc.eval_every = eval_every;
  rc.seed = seed;
  rc.opt = opt;
  rc.lr = lr;
  rc.prune = prune;
  return rc;
}

MlpConfig ExperimentConfig::teacher_arch() const {
  MlpConfig t;
  t.input_dim = mlp.input_dim;
  t.hidden_widths = teacher_hidden;
  t.output_dim = mlp.output_dim;
  return t;
}

}  // namespace pruneforge
