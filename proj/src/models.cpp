#include "pruneforge/models.hpp"

namespace pruneforge {

int64_t lstm_preset_hidden(const std::string& name) {
  if (name == "small") return 64;
  if (name == "medium") return 128;
  if (name == "large") return 256;
  throw ConfigError("unknown lstm preset '" + name + "' (expected small|medium|large)");
}

std::string trace_to_csv(const MetricsTrace& trace) {
  std::string out = "step,lr,commanded_sparsity,train_loss,eval_" + trace.metric_name + "\n";
  char buf[160];
  for (const auto& r : trace.rows) {
    snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g,%.9g\n", (long long)r.step, r.lr, r.commanded_sparsity,
             r.train_loss, r.eval_metric);
    out += buf;
  }
  return out;
}

}  // namespace pruneforge
