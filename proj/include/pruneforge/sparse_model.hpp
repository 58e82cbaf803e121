// Sparse model files: named parameter entries stored dense, bit-mask or
// CSR(C) (magic "SMF1", little-endian, codec byte per entry, codec payloads
// reuse the SBM1/SCM1 layouts). Includes the dense- and sparse-path
// inference used by the infer command.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pruneforge/checkpoint.hpp"
#include "pruneforge/sparse_format.hpp"

namespace pruneforge {

enum class SparseCodec : uint8_t { Dense = 0, Bitmask = 1, Csrc = 2 };

struct SparseEntry {
  std::string name;
  SparseCodec codec = SparseCodec::Dense;
  Tensor<float> dense;            // codec Dense
  BitmaskMatrix<float> bitmask;   // codec Bitmask
  CsrcMatrix<float> csrc;         // codec Csrc

  int64_t rows() const;
  int64_t cols() const;
  int64_t total() const;
  int64_t nnz() const;
  Tensor<float> to_dense() const;
  // y = M x against the stored representation.
  Tensor<float> matvec(const Tensor<float>& x) const;
  Tensor<float> row(int64_t i) const;
};

struct SparseModel {
  std::vector<SparseEntry> entries;

  const SparseEntry& at(const std::string& name) const;
  void write_file(const std::string& path) const;
  static SparseModel read_file(const std::string& path);
};

// Encode a checkpoint's effective (masked) weights. format is "best",
// "bitmask" or "csrc"; "best" stores each tensor in its cheapest
// representation (raw dense included). Tensors without a companion mask and
// non-matrix tensors are stored dense.
SparseModel build_sparse_model(const Checkpoint& ckpt, const std::string& format, int count_bits);

// ---------------------------------------------------------------------------
// Inference paths. Architectures come from the manifest the train command
// writes next to the checkpoint.
// ---------------------------------------------------------------------------
struct MlpArch {
  int64_t input_dim = 0;
  std::vector<int64_t> hidden;  // scaled widths
  int64_t output_dim = 0;
};

struct LstmArch {
  int64_t vocab = 0;
  int64_t hidden = 0;
  std::string alphabet;
};

// Logits for every input row, walking the encoded representations with spmv.
Tensor<float> mlp_infer_sparse(const SparseModel& m, const MlpArch& arch, const Tensor<float>& inputs);
// Same computation on decoded dense tensors through the regular layers.
Tensor<float> mlp_infer_dense(const SparseModel& m, const MlpArch& arch, const Tensor<float>& inputs);

struct LmInferResult {
  int64_t positions = 0;
  double mean_nll = 0;
};

// Batch-1 pass over the id stream with carried state; next-char NLL.
LmInferResult lstm_infer_sparse(const SparseModel& m, const LstmArch& arch, const std::vector<int32_t>& ids);
LmInferResult lstm_infer_dense(const SparseModel& m, const LstmArch& arch, const std::vector<int32_t>& ids);

}  // namespace pruneforge
