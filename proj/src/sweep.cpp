#include "pruneforge/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

namespace pruneforge {

namespace {

std::string fmt_g(double v) {
  char buf[48];
  snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

struct VariantSpec {
  std::string label;
  double alpha = 1.0;          // mlp dense family
  std::string preset;          // lstm dense family
  std::optional<double> target;  // sparse variants: s_f on the largest model
};

std::vector<VariantSpec> enumerate_variants(const ExperimentConfig& cfg) {
  std::vector<VariantSpec> out;
  if (cfg.task == "mlp") {
    for (double a : cfg.sweep_dense_alphas) out.push_back({"dense_a" + fmt_g(a), a, "", std::nullopt});
  } else {
    for (const auto& p : cfg.sweep_dense_presets) out.push_back({"dense_" + p, 1.0, p, std::nullopt});
  }
  for (double s : cfg.sweep_sparse_targets) out.push_back({"sparse_s" + fmt_g(s), 1.0, "", s});
  if (out.empty()) throw ConfigError("compare sweep: no variants configured");
  return out;
}

template <typename Task>
SweepRow finish_row(Task& task, const VariantSpec& v, uint64_t seed, double metric) {
  SweepRow row;
  row.variant = v.label;
  row.seed = seed;
  row.sparsity = v.target.value_or(0.0);
  row.metric = metric;
  auto slots = task.param_slots();
  row.nnz_params = nnz_param_count(slots);
  row.total_params = total_param_count(slots);
  model_storage_bytes(slots, row);
  return row;
}

}  // namespace

SweepResult run_compare_sweep(const ExperimentConfig& cfg, const std::function<void(const std::string&)>& log) {
  auto variants = enumerate_variants(cfg);

  // shared read-only data
  TeacherDataset<float> teacher_data;
  CharCorpus corpus;
  if (cfg.task == "mlp") {
    teacher_data = TeacherDataset<float>::make(cfg.data_seed, cfg.teacher_arch(), cfg.train_n, cfg.val_n);
  } else {
    corpus = CharCorpus::load_file(cfg.corpus_path);
  }

  struct Job {
    size_t variant;
    uint64_t seed;
  };
  std::vector<Job> jobs;
  for (size_t v = 0; v < variants.size(); ++v)
    for (uint64_t s : cfg.seeds) jobs.push_back({v, s});

  SweepResult result;
  result.rows.resize(jobs.size());
  std::mutex log_mu;
  std::atomic<size_t> next{0};
  std::atomic<bool> failed{false};
  std::string first_error;

  auto worker = [&]() {
    while (true) {
      size_t j = next.fetch_add(1);
      if (j >= jobs.size() || failed.load()) return;
      const auto& vspec = variants[jobs[j].variant];
      const uint64_t seed = jobs[j].seed;
      try {
        ExperimentConfig run_cfg = cfg;
        run_cfg.seed = seed;
        if (vspec.target) {
          run_cfg.prune = run_cfg.prune_base;
          run_cfg.prune->final_sparsity = *vspec.target;
        } else {
          run_cfg.prune.reset();
        }
        if (log) {
          std::lock_guard<std::mutex> lk(log_mu);
          log("run " + vspec.label + " seed " + std::to_string(seed));
        }
        if (cfg.task == "mlp") {
          MlpConfig mc = run_cfg.mlp;
          mc.width_multiplier = vspec.target ? 1.0 : vspec.alpha;
          SeededRng init_rng(seed);
          MlpTask<float> task(mc, init_rng, &teacher_data, run_cfg.batch);
          auto res = run_training(task, run_cfg.run_config());
          result.rows[j] = finish_row(task, vspec, seed, res.final_metric);
        } else {
          LstmLmConfig lc;
          lc.vocab = corpus.vocab();
          lc.hidden = vspec.target ? cfg.lstm_hidden : (vspec.preset.empty() ? cfg.lstm_hidden
                                                                             : lstm_preset_hidden(vspec.preset));
          lc.seq_len = cfg.seq_len;
          lc.batch = cfg.batch;
          SeededRng init_rng(seed);
          LmTask<float> task(lc, init_rng, &corpus);
          task.eval_window_cap = cfg.eval_window_cap;
          auto res = run_training(task, run_cfg.run_config());
          result.rows[j] = finish_row(task, vspec, seed, res.final_metric);
        }
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lk(log_mu);
        if (!failed.exchange(true)) first_error = e.what();
        return;
      }
    }
  };

  const int64_t workers = std::max<int64_t>(1, std::min<int64_t>(cfg.sweep_workers, int64_t(jobs.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int64_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failed.load()) throw Error("compare sweep failed: " + first_error);

  result.metric_name = cfg.task == "mlp" ? "accuracy" : "perplexity";
  result.higher_better = cfg.task == "mlp";
  std::sort(result.rows.begin(), result.rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return a.variant != b.variant ? a.variant < b.variant : a.seed < b.seed;
  });
  return result;
}

std::string sweep_runs_csv(const SweepResult& r) {
  std::string out = "variant,seed,sparsity,nnz_params,total_params," + r.metric_name +
                    ",bytes_dense,bytes_bitmask,bytes_csrc,bytes_best\n";
  char buf[320];
  for (const auto& row : r.rows) {
    snprintf(buf, sizeof(buf), "%s,%llu,%.9g,%lld,%lld,%.9g,%lld,%lld,%lld,%lld\n", row.variant.c_str(),
             (unsigned long long)row.seed, row.sparsity, (long long)row.nnz_params, (long long)row.total_params,
             row.metric, (long long)row.bytes_dense, (long long)row.bytes_bitmask, (long long)row.bytes_csrc,
             (long long)row.bytes_best);
    out += buf;
  }
  return out;
}

std::string sweep_summary_csv(const SweepResult& r) {
  std::string out =
      "variant,sparsity,runs,nnz_params_mean," + r.metric_name + "_mean," + r.metric_name + "_stddev,bytes_best_mean\n";
  char buf[320];
  for (size_t i = 0; i < r.rows.size();) {
    size_t j = i;
    double msum = 0, msq = 0, nnz = 0, best = 0;
    while (j < r.rows.size() && r.rows[j].variant == r.rows[i].variant) {
      msum += r.rows[j].metric;
      nnz += double(r.rows[j].nnz_params);
      best += double(r.rows[j].bytes_best);
      ++j;
    }
    const double n = double(j - i);
    const double mean = msum / n;
    for (size_t k = i; k < j; ++k) msq += (r.rows[k].metric - mean) * (r.rows[k].metric - mean);
    const double stddev = n > 1 ? std::sqrt(msq / (n - 1)) : 0.0;  // sample stddev; 0 for a single seed
    snprintf(buf, sizeof(buf), "%s,%.9g,%zu,%.9g,%.9g,%.9g,%.9g\n", r.rows[i].variant.c_str(), r.rows[i].sparsity,
             size_t(n), nnz / n, mean, stddev, best / n);
    out += buf;
    i = j;
  }
  return out;
}

}  // namespace pruneforge
