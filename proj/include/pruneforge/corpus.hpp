// Character-level corpus handling: 90/5/5 positional split, vocabulary built
// from the training split only, plus the deterministic generator used to
// produce the bundled text asset.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace pruneforge {

struct CharCorpus {
  std::vector<int32_t> train, valid, test;
  std::string alphabet;  // id -> char; id 0 is reserved for out-of-vocabulary chars

  int64_t vocab() const { return int64_t(alphabet.size()); }

  static CharCorpus from_text(const std::string& text);
  static CharCorpus load_file(const std::string& path);
};

// Deterministic pseudo-English prose, ~target_bytes long. Same seed, same
// bytes, on every platform.
std::string synth_corpus(uint64_t seed, size_t target_bytes);

}  // namespace pruneforge
