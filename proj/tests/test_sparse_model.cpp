#include <doctest.h>

#include <cmath>

#include "pruneforge/models.hpp"
#include "pruneforge/sparse_model.hpp"
#include "pruneforge/train.hpp"

using namespace pruneforge;

namespace {

// Checkpoint for a small trained-ish MLP with masks applied.
Checkpoint make_mlp_checkpoint(MlpModel<float>& model) {
  Checkpoint ckpt;
  for (auto& s : model.param_slots()) {
    ckpt.put_tensor(s.name, CkptKind::TensorData, *s.values);
    if (s.owner) ckpt.put_mask(s.name + ".mask", s.owner->mask, s.values->shape());
  }
  ckpt.put_scalar_u64("step", 0);
  ckpt.put_scalar_u64("rng_state", 1);
  return ckpt;
}

}  // namespace

TEST_CASE("compressed model decodes to the checkpoint's effective weights bitwise") {
  MlpConfig cfg;
  cfg.input_dim = 9;
  cfg.hidden_widths = {14};
  cfg.output_dim = 5;
  SeededRng rng(31);
  MlpModel<float> model(cfg, rng);
  for (auto* p : model.prunable_params()) update_mask(*p, 0.6);
  model.refresh_effective();
  auto ckpt = make_mlp_checkpoint(model);

  for (const char* format : {"best", "bitmask", "csrc"}) {
    auto sm = build_sparse_model(ckpt, format, 4);
    for (auto& s : model.param_slots()) {
      auto decoded = sm.at(s.name).to_dense();
      Tensor<float> want = s.owner ? s.owner->effective() : *s.values;
      if (decoded.rank() != want.rank()) want = Tensor<float>(decoded.shape(), std::vector<float>(
                                                  want.data(), want.data() + want.numel()));
      CHECK(decoded.bitwise_equal(want));
    }
  }
}

TEST_CASE("sparse model file round-trips") {
  MlpConfig cfg;
  cfg.input_dim = 7;
  cfg.hidden_widths = {10};
  cfg.output_dim = 4;
  SeededRng rng(32);
  MlpModel<float> model(cfg, rng);
  for (auto* p : model.prunable_params()) update_mask(*p, 0.8);
  model.refresh_effective();
  auto sm = build_sparse_model(make_mlp_checkpoint(model), "best", 4);
  sm.write_file("/tmp/pf_test_model.smf");
  auto back = SparseModel::read_file("/tmp/pf_test_model.smf");
  REQUIRE(back.entries.size() == sm.entries.size());
  for (size_t i = 0; i < sm.entries.size(); ++i) {
    CHECK(back.entries[i].name == sm.entries[i].name);
    CHECK(back.entries[i].codec == sm.entries[i].codec);
    CHECK(back.entries[i].to_dense().bitwise_equal(sm.entries[i].to_dense()));
  }
}

TEST_CASE("best format never stores more bytes than a forced format") {
  MlpConfig cfg;
  cfg.input_dim = 16;
  cfg.hidden_widths = {24};
  cfg.output_dim = 6;
  SeededRng rng(33);
  for (double s : {0.0, 0.5, 0.95}) {
    MlpModel<float> model(cfg, rng);
    for (auto* p : model.prunable_params()) update_mask(*p, s);
    model.refresh_effective();
    auto ckpt = make_mlp_checkpoint(model);
    auto count_bytes = [](const SparseModel& m) {
      m.write_file("/tmp/pf_fmt_probe.smf");
      return read_file_bytes("/tmp/pf_fmt_probe.smf").size();
    };
    size_t best = count_bytes(build_sparse_model(ckpt, "best", 4));
    CHECK(best <= count_bytes(build_sparse_model(ckpt, "bitmask", 4)));
    CHECK(best <= count_bytes(build_sparse_model(ckpt, "csrc", 4)));
  }
}

TEST_CASE("mlp sparse and dense inference paths agree") {
  MlpConfig cfg;
  cfg.input_dim = 12;
  cfg.hidden_widths = {18, 9};
  cfg.output_dim = 5;
  SeededRng rng(34);
  MlpModel<float> model(cfg, rng);
  for (auto* p : model.prunable_params()) update_mask(*p, 0.7);
  model.refresh_effective();
  auto sm = build_sparse_model(make_mlp_checkpoint(model), "csrc", 4);

  MlpArch arch{cfg.input_dim, cfg.scaled_widths(), cfg.output_dim};
  auto inputs = uniform_init<float>({8, 12}, 1.0, rng);
  auto a = mlp_infer_sparse(sm, arch, inputs);
  auto d = mlp_infer_dense(sm, arch, inputs);
  REQUIRE(a.same_shape(d));
  for (int64_t i = 0; i < a.numel(); ++i) {
    double rel = std::fabs(double(a.at(i)) - double(d.at(i))) /
                 std::max({std::fabs(double(a.at(i))), std::fabs(double(d.at(i))), 1.0});
    CHECK(rel <= 1e-5);
  }
  // fully masked model gives all-zero logits (uniform softmax)
  MlpModel<float> dead(cfg, rng);
  for (auto* p : dead.prunable_params()) update_mask(*p, 1.0);
  dead.refresh_effective();
  auto sm_dead = build_sparse_model(make_mlp_checkpoint(dead), "best", 4);
  auto z = mlp_infer_sparse(sm_dead, arch, inputs);
  for (int64_t i = 0; i < z.numel(); ++i) CHECK(z.at(i) == 0.0f);
}

TEST_CASE("lstm sparse and dense inference paths agree") {
  LstmLmConfig cfg;
  cfg.vocab = 11;
  cfg.hidden = 6;
  cfg.seq_len = 4;
  cfg.batch = 2;
  SeededRng rng(35);
  LstmLmModel<float> model(cfg, rng);
  for (auto* p : model.prunable_params()) update_mask(*p, 0.5);
  model.refresh_effective();

  Checkpoint ckpt;
  for (auto& s : model.param_slots()) {
    ckpt.put_tensor(s.name, CkptKind::TensorData, *s.values);
    if (s.owner) ckpt.put_mask(s.name + ".mask", s.owner->mask, s.values->shape());
  }
  auto sm = build_sparse_model(ckpt, "bitmask", 4);

  LstmArch arch{cfg.vocab, cfg.hidden, "abcdefghijk"};
  std::vector<int32_t> ids{1, 4, 2, 9, 0, 3, 7, 7, 5, 10, 8};
  auto a = lstm_infer_sparse(sm, arch, ids);
  auto d = lstm_infer_dense(sm, arch, ids);
  CHECK(a.positions == int64_t(ids.size()) - 1);
  CHECK(a.positions == d.positions);
  const double rel =
      std::fabs(a.mean_nll - d.mean_nll) / std::max({std::fabs(a.mean_nll), std::fabs(d.mean_nll), 1.0});
  CHECK(rel <= 1e-5);
}
