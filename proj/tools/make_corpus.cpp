// Regenerates the bundled corpus asset. The committed file was produced with
// the defaults below; rerunning reproduces it byte for byte.
#include <cstdio>
#include <cstdlib>
#include <string>

#include "pruneforge/common.hpp"
#include "pruneforge/corpus.hpp"

int main(int argc, char** argv) {
  std::string out = "assets/corpus.txt";
  size_t bytes = 1000000;
  uint64_t seed = 230862;
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    auto need = [&](const char* flag) {
      if (i + 1 >= argc) {
        std::fprintf(stderr, "missing value for %s\n", flag);
        std::exit(2);
      }
      return std::string(argv[++i]);
    };
    if (a == "--out")
      out = need("--out");
    else if (a == "--bytes")
      bytes = size_t(std::stoull(need("--bytes")));
    else if (a == "--seed")
      seed = std::stoull(need("--seed"));
    else {
      std::fprintf(stderr, "usage: make_corpus [--out PATH] [--bytes N] [--seed N]\n");
      return 2;
    }
  }
  auto text = pruneforge::synth_corpus(seed, bytes);
  pruneforge::write_file_text(out, text);
  std::printf("wrote %zu bytes to %s\n", text.size(), out.c_str());
  return 0;
}
