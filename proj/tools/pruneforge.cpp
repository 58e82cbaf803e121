// pruneforge: train-with-pruning experiments from the command line.
// Subcommands: schedule | train | compress | infer | compare | footprint.
// Exit codes: 0 success, 2 config error, 3 divergence, 4 I/O error.
#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "pruneforge/config.hpp"
#include "pruneforge/models.hpp"
#include "pruneforge/sparse_model.hpp"
#include "pruneforge/sweep.hpp"
#include "pruneforge/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace pruneforge;

namespace {

double wall_ms(const std::function<void()>& fn) {
  auto t0 = std::chrono::steady_clock::now();
  fn();
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

void apply_thread_config(int threads_flag) {
  if (const char* env = std::getenv("PRUNE_FORGE_THREADS")) {
    try {
      set_thread_count(std::stoi(env));
      return;
    } catch (const std::exception&) {
      throw ConfigError("PRUNE_FORGE_THREADS must be an integer");
    }
  }
  set_thread_count(threads_flag);
}

void ensure_out_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory " + out + ": " + ec.message());
}

std::string hex_u64(uint64_t v) {
  char buf[20];
  snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)v);
  return buf;
}

// ---------------------------------------------------------------------------
// schedule
// ---------------------------------------------------------------------------
int cmd_schedule(double si, double sf, int64_t t0, int64_t n, int64_t dt, const std::string& out) {
  PruningSchedule sched;
  sched.initial_sparsity = si;
  sched.final_sparsity = sf;
  sched.start_step = t0;
  sched.num_prune_steps = n;
  sched.prune_every = dt;
  sched.validate();
  std::string csv = "t,sparsity\n";
  char buf[64];
  for (int64_t k = 0; k <= n; ++k) {
    int64_t t = t0 + k * dt;
    snprintf(buf, sizeof(buf), "%lld,%.12g\n", (long long)t, sched.sparsity_at(t));
    csv += buf;
  }
  if (out.empty()) {
    std::fputs(csv.c_str(), stdout);
  } else {
    write_file_text(out, csv);
    std::printf("wrote %s (%lld grid points)\n", out.c_str(), (long long)(n + 1));
  }
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------
json model_manifest(const ExperimentConfig& cfg, const CharCorpus* corpus) {
  json model;
  model["task"] = cfg.task;
  if (cfg.task == "mlp") {
    model["input_dim"] = cfg.mlp.input_dim;
    model["hidden"] = cfg.mlp.scaled_widths();
    model["output_dim"] = cfg.mlp.output_dim;
    model["alpha"] = cfg.mlp.width_multiplier;
  } else {
    model["vocab"] = corpus->vocab();
    model["hidden"] = cfg.lstm_hidden;
    model["seq_len"] = cfg.seq_len;
    model["alphabet"] = corpus->alphabet;
  }
  return model;
}

template <typename Task>
int train_and_emit(Task& task, const ExperimentConfig& cfg, const std::string& out, const json& model_section) {
  auto result = run_training(task, cfg.run_config());
  ensure_out_dir(out);
  const std::string ckpt_path = out + "/checkpoint.spz";
  write_checkpoint_file(ckpt_path, result.checkpoint);
  write_file_text(out + "/metrics.csv", trace_to_csv(result.trace));

  auto report = task.evaluate_validation();
  json manifest;
  manifest["config_hash"] = hex_u64(cfg.run_id());
  manifest["seed"] = cfg.seed;
  manifest["step"] = cfg.steps;
  manifest["model"] = model_section;
  manifest["metrics"] = {{"final_train_loss", result.final_train_loss},
                         {std::string("final_") + task.metric_name(), result.final_metric},
                         {"nnz_params", report.nnz_params},
                         {"total_params", report.total_params}};
  write_file_text(ckpt_path + ".manifest.json", manifest.dump(2) + "\n");

  std::printf("trained %lld steps: final %s %.6g, nnz %lld / %lld params\n", (long long)cfg.steps, task.metric_name(),
              result.final_metric, (long long)report.nnz_params, (long long)report.total_params);
  std::printf("wrote %s (+.manifest.json) and metrics.csv\n", ckpt_path.c_str());
  return 0;
}

int cmd_train(const std::string& config_path, int64_t seed_override, const std::string& out) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  if (seed_override >= 0) cfg.seed = uint64_t(seed_override);
  if (cfg.task == "mlp") {
    auto data = TeacherDataset<float>::make(cfg.data_seed, cfg.teacher_arch(), cfg.train_n, cfg.val_n);
    SeededRng init_rng(cfg.seed);
    MlpTask<float> task(cfg.mlp, init_rng, &data, cfg.batch);
    return train_and_emit(task, cfg, out, model_manifest(cfg, nullptr));
  }
  auto corpus = CharCorpus::load_file(cfg.corpus_path);
  LstmLmConfig lc;
  lc.vocab = corpus.vocab();
  lc.hidden = cfg.lstm_hidden;
  lc.seq_len = cfg.seq_len;
  lc.batch = cfg.batch;
  SeededRng init_rng(cfg.seed);
  LmTask<float> task(lc, init_rng, &corpus);
  task.eval_window_cap = cfg.eval_window_cap;
  return train_and_emit(task, cfg, out, model_manifest(cfg, &corpus));
}

// ---------------------------------------------------------------------------
// compress
// ---------------------------------------------------------------------------
json footprint_json(const Checkpoint& ckpt, const SparseModel& model, int count_bits) {
  json tensors = json::array();
  int64_t model_total = 0, model_nnz = 0, model_stored = 0;
  int64_t prunable_total = 0, prunable_nnz = 0, prunable_padded = 0;
  for (const auto& e : model.entries) {
    const int64_t total = e.total(), nnz = e.nnz();
    json t;
    t["name"] = e.name;
    t["total_params"] = total;
    t["nnz"] = nnz;
    const bool has_mask = ckpt.find(e.name + ".mask") != nullptr;
    int64_t stored = 0;
    if (!has_mask) {
      t["codec"] = "dense";
      stored = total * 4;
      t["stored_bytes"] = stored;
    } else {
      auto eff = e.to_dense();
      const int64_t padded = csrc_entry_count(eff, count_bits);
      prunable_total += total;
      prunable_nnz += nnz;
      prunable_padded += padded;
      auto rep = footprint(total, nnz, count_bits, 4, padded);
      t["payload_bytes"] = rep.payload_bytes;
      if (rep.bitmask_overhead_bytes) {
        t["bitmask_overhead_bytes"] = *rep.bitmask_overhead_bytes;
        t["csrc_overhead_bytes_theoretical"] = (nnz * count_bits + 7) / 8;
        t["csrc_overhead_bytes_actual"] = *rep.csrc_overhead_bytes;
        t["csrc_entries_including_padding"] = padded;
      } else {
        t["bitmask_overhead_bytes"] = nullptr;  // dense tensor: no representation overhead
        t["csrc_overhead_bytes_actual"] = nullptr;
      }
      switch (e.codec) {
        case SparseCodec::Dense: t["codec"] = "dense"; stored = total * 4; break;
        case SparseCodec::Bitmask:
          t["codec"] = "bitmask";
          stored = nnz * 4 + (total + 7) / 8;
          break;
        case SparseCodec::Csrc:
          t["codec"] = "csrc";
          stored = padded * 4 + (padded * count_bits + 7) / 8;
          break;
      }
      t["stored_bytes"] = stored;
    }
    model_total += total;
    model_nnz += nnz;
    model_stored += stored;
    tensors.push_back(t);
  }

  json top;
  top["count_bits"] = count_bits;
  top["bytes_per_elem"] = 4;
  top["tensors"] = tensors;
  json m;
  m["total_params"] = model_total;
  m["nnz_params"] = model_nnz;
  m["dense_bytes"] = model_total * 4;
  m["stored_total_bytes"] = model_stored;
  m["stored_total_mb"] = double(model_stored) / 1e6;
  if (prunable_total > 0 && prunable_nnz < prunable_total) {
    m["prunable_bitmask_overhead_bytes"] = (prunable_total + 7) / 8;
    m["prunable_csrc_overhead_bytes_theoretical"] = (prunable_nnz * count_bits + 7) / 8;
    m["prunable_csrc_overhead_bytes_actual"] = (prunable_padded * count_bits + 7) / 8;
  } else {
    m["prunable_bitmask_overhead_bytes"] = nullptr;
    m["prunable_csrc_overhead_bytes_actual"] = nullptr;
  }
  top["model"] = m;
  return top;
}

int cmd_compress(const std::string& ckpt_path, const std::string& format, int count_bits, const std::string& out) {
  if (count_bits != 4 && count_bits != 5) throw ConfigError("--count-bits must be 4 or 5");
  Checkpoint ckpt = read_checkpoint_file(ckpt_path);
  auto model = build_sparse_model(ckpt, format, count_bits);
  ensure_out_dir(out);
  model.write_file(out + "/model.smf");

  json meta;
  const std::string manifest_path = ckpt_path + ".manifest.json";
  try {
    meta = json::parse(read_file_text(manifest_path));
  } catch (const std::exception&) {
    throw IoError("cannot read checkpoint manifest " + manifest_path);
  }
  json mj;
  mj["model"] = meta["model"];
  mj["source_checkpoint"] = ckpt_path;
  mj["format"] = format;
  mj["footprint"] = footprint_json(ckpt, model, count_bits);
  write_file_text(out + "/model.json", mj.dump(2) + "\n");

  const auto& fp = mj["footprint"]["model"];
  std::printf("compressed %lld tensors: %lld / %lld nnz, stored %.2f MB (dense %.2f MB)\n",
              (long long)model.entries.size(), fp["nnz_params"].get<long long>(),
              fp["total_params"].get<long long>(), fp["stored_total_mb"].get<double>(),
              fp["dense_bytes"].get<long long>() / 1e6);
  std::printf("wrote %s/model.smf and %s/model.json\n", out.c_str(), out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// infer
// ---------------------------------------------------------------------------
Tensor<float> read_input_csv(const std::string& path, int64_t dim) {
  std::string text = read_file_text(path);
  std::vector<float> vals;
  int64_t rows = 0;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty() || line == "\r") continue;
    ++rows;
    size_t p = 0;
    int64_t count = 0;
    while (p <= line.size()) {
      size_t c = line.find(',', p);
      if (c == std::string::npos) c = line.size();
      vals.push_back(std::stof(line.substr(p, c - p)));
      ++count;
      p = c + 1;
    }
    if (count != dim)
      throw ConfigError("input row " + std::to_string(rows) + " has " + std::to_string(count) +
                        " values, model expects " + std::to_string(dim));
  }
  if (rows == 0) throw ConfigError("input file has no rows");
  return Tensor<float>({rows, dim}, std::move(vals));
}

int cmd_infer(const std::string& model_path, const std::string& input_path, const std::string& out) {
  SparseModel model = SparseModel::read_file(model_path);
  std::string manifest_path = model_path;
  const std::string smf = ".smf";
  if (manifest_path.size() > smf.size() && manifest_path.ends_with(smf))
    manifest_path = manifest_path.substr(0, manifest_path.size() - smf.size()) + ".json";
  else
    manifest_path += ".json";
  json meta = json::parse(read_file_text(manifest_path));
  const json& mj = meta["model"];
  const std::string task = mj["task"].get<std::string>();

  if (task == "mlp") {
    MlpArch arch;
    arch.input_dim = mj["input_dim"].get<int64_t>();
    arch.hidden = mj["hidden"].get<std::vector<int64_t>>();
    arch.output_dim = mj["output_dim"].get<int64_t>();
    auto inputs = read_input_csv(input_path, arch.input_dim);

    Tensor<float> sparse_logits, dense_logits;
    double sparse_ms = wall_ms([&] { sparse_logits = mlp_infer_sparse(model, arch, inputs); });
    double dense_ms = wall_ms([&] { dense_logits = mlp_infer_dense(model, arch, inputs); });

    double worst = 0;
    for (int64_t i = 0; i < sparse_logits.numel(); ++i) {
      double a = sparse_logits.at(i), d = dense_logits.at(i);
      worst = std::max(worst, std::fabs(a - d) / std::max({std::fabs(a), std::fabs(d), 1.0}));
    }
    std::string csv;
    char buf[32];
    for (int64_t r = 0; r < sparse_logits.rows(); ++r) {
      for (int64_t j = 0; j < sparse_logits.cols(); ++j) {
        snprintf(buf, sizeof(buf), "%.9g", double(sparse_logits(r, j)));
        csv += buf;
        csv += (j + 1 < sparse_logits.cols()) ? ',' : '\n';
      }
    }
    if (!out.empty()) write_file_text(out, csv);
    std::printf("%lld rows: sparse path %.3f ms, dense path %.3f ms, max rel diff %.3g\n",
                (long long)sparse_logits.rows(), sparse_ms, dense_ms, worst);
    if (worst > 1e-5) {
      std::fprintf(stderr, "sparse/dense paths disagree beyond 1e-5 relative\n");
      return 1;
    }
    return 0;
  }

  LstmArch arch;
  arch.vocab = mj["vocab"].get<int64_t>();
  arch.hidden = mj["hidden"].get<int64_t>();
  arch.alphabet = mj["alphabet"].get<std::string>();
  std::string text = read_file_text(input_path);
  std::vector<int32_t> ids;
  ids.reserve(text.size());
  for (char ch : text) {
    size_t id = arch.alphabet.find(ch);
    ids.push_back(id == std::string::npos ? 0 : int32_t(id));
  }

  LmInferResult sparse_res, dense_res;
  double sparse_ms = wall_ms([&] { sparse_res = lstm_infer_sparse(model, arch, ids); });
  double dense_ms = wall_ms([&] { dense_res = lstm_infer_dense(model, arch, ids); });
  double diff = std::fabs(sparse_res.mean_nll - dense_res.mean_nll) /
                std::max({std::fabs(sparse_res.mean_nll), std::fabs(dense_res.mean_nll), 1.0});

  json summary;
  summary["positions"] = sparse_res.positions;
  summary["mean_nll"] = sparse_res.mean_nll;
  summary["perplexity"] = perplexity(sparse_res.mean_nll);
  summary["mean_nll_dense_path"] = dense_res.mean_nll;
  summary["perplexity_dense_path"] = perplexity(dense_res.mean_nll);
  if (!out.empty()) write_file_text(out, summary.dump(2) + "\n");
  std::printf("%lld positions: perplexity %.4f, sparse path %.3f ms, dense path %.3f ms, rel diff %.3g\n",
              (long long)sparse_res.positions, perplexity(sparse_res.mean_nll), sparse_ms, dense_ms, diff);
  if (diff > 1e-5) {
    std::fprintf(stderr, "sparse/dense paths disagree beyond 1e-5 relative\n");
    return 1;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// compare / footprint
// ---------------------------------------------------------------------------
int cmd_compare(const std::string& config_path, const std::string& out) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  auto result = run_compare_sweep(cfg, [](const std::string& msg) { std::printf("%s\n", msg.c_str()); });
  ensure_out_dir(out);
  write_file_text(out + "/runs.csv", sweep_runs_csv(result));
  write_file_text(out + "/summary.csv", sweep_summary_csv(result));
  std::printf("\n%s", sweep_summary_csv(result).c_str());
  std::printf("wrote %s/runs.csv and %s/summary.csv\n", out.c_str(), out.c_str());
  return 0;
}

int cmd_footprint(int64_t total, int64_t nnz, int count_bits, int bytes_per_elem) {
  auto r = footprint(total, nnz, count_bits, bytes_per_elem);
  json j;
  j["total_params"] = r.total_params;
  j["nnz"] = r.nnz;
  j["dense_bytes"] = r.dense_bytes;
  j["payload_bytes"] = r.payload_bytes;
  if (r.bitmask_overhead_bytes) {
    j["bitmask_overhead_bytes"] = *r.bitmask_overhead_bytes;
    j["bitmask_overhead_mb"] = r.mb(*r.bitmask_overhead_bytes);
    j["csrc_overhead_bytes"] = *r.csrc_overhead_bytes;
    j["csrc_overhead_mb"] = r.mb(*r.csrc_overhead_bytes);
  } else {
    j["bitmask_overhead_bytes"] = nullptr;  // dense model: N/A
    j["csrc_overhead_bytes"] = nullptr;
  }
  j["best_total_bytes"] = r.best_total_bytes;
  j["best_total_mb"] = r.best_total_mb();
  std::printf("%s\n", j.dump(2).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gradual magnitude pruning toolkit"};
  app.require_subcommand(1);

  int threads = 1;
  app.add_option("--threads", threads, "worker threads for kernels (PRUNE_FORGE_THREADS overrides)");

  auto* sched = app.add_subcommand("schedule", "print the cubic sparsity schedule grid");
  double si = 0.0, sf = 0.875;
  int64_t t0 = 0, n = 10, dt = 100;
  std::string sched_out;
  sched->add_option("--si", si, "initial sparsity");
  sched->add_option("--sf", sf, "final sparsity");
  sched->add_option("--t0", t0, "start step");
  sched->add_option("--n", n, "number of pruning steps");
  sched->add_option("--dt", dt, "pruning frequency in steps");
  sched->add_option("--out", sched_out, "write CSV here instead of stdout");

  auto* train = app.add_subcommand("train", "train a model per the config file");
  std::string train_config, train_out = "out/train";
  int64_t train_seed = -1;
  train->add_option("--config", train_config, "experiment config file")->required();
  train->add_option("--seed", train_seed, "override the config seed");
  train->add_option("--out", train_out, "output directory");

  auto* compress = app.add_subcommand("compress", "encode a checkpoint's masked weights as a sparse model");
  std::string comp_ckpt, comp_format = "best", comp_out = "out/compress";
  int comp_bits = 4;
  compress->add_option("--checkpoint", comp_ckpt, "checkpoint.spz path")->required();
  compress->add_option("--format", comp_format, "best | bitmask | csrc");
  compress->add_option("--count-bits", comp_bits, "CSR(C) count field width (4 or 5)");
  compress->add_option("--out", comp_out, "output directory");

  auto* infer = app.add_subcommand("infer", "run a sparse model file on inputs, checking against the dense path");
  std::string infer_model, infer_input, infer_out;
  infer->add_option("--model", infer_model, "model.smf path")->required();
  infer->add_option("--input", infer_input, "input file (CSV rows for mlp, text for lstm)")->required();
  infer->add_option("--out", infer_out, "output file");

  auto* compare = app.add_subcommand("compare", "large-sparse vs small-dense sweep");
  std::string cmp_config, cmp_out = "out/compare";
  compare->add_option("--config", cmp_config, "sweep config file")->required();
  compare->add_option("--out", cmp_out, "output directory");

  auto* fp = app.add_subcommand("footprint", "storage overhead arithmetic for a parameter count");
  int64_t fp_total = 0, fp_nnz = 0;
  int fp_bits = 4, fp_bpe = 4;
  fp->add_option("--total", fp_total, "total parameter count")->required();
  fp->add_option("--nnz", fp_nnz, "nonzero parameter count")->required();
  fp->add_option("--count-bits", fp_bits, "CSR(C) count field width");
  fp->add_option("--bytes-per-elem", fp_bpe, "bytes per nonzero element");

  try {
    app.parse(argc, argv);
    apply_thread_config(threads);
    if (sched->parsed()) return cmd_schedule(si, sf, t0, n, dt, sched_out);
    if (train->parsed()) return cmd_train(train_config, train_seed, train_out);
    if (compress->parsed()) return cmd_compress(comp_ckpt, comp_format, comp_bits, comp_out);
    if (infer->parsed()) return cmd_infer(infer_model, infer_input, infer_out);
    if (compare->parsed()) return cmd_compare(cmp_config, cmp_out);
    if (fp->parsed()) return cmd_footprint(fp_total, fp_nnz, fp_bits, fp_bpe);
    return 2;
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "divergence: %s\n", e.what());
    return 3;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
