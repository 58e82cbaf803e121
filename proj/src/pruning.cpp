#include "pruneforge/pruning.hpp"

namespace pruneforge {

PruneScheme prune_scheme_from_string(const std::string& s) {
  if (s == "simultaneous") return PruneScheme::Simultaneous;
  if (s == "layerwise_constant" || s == "layerwise") return PruneScheme::LayerwiseConstant;
  if (s == "global") return PruneScheme::Global;
  throw ConfigError("unknown pruning scheme '" + s + "' (expected simultaneous|layerwise_constant|global)");
}

std::string to_string(PruneScheme s) {
  switch (s) {
    case PruneScheme::Simultaneous: return "simultaneous";
    case PruneScheme::LayerwiseConstant: return "layerwise_constant";
    case PruneScheme::Global: return "global";
  }
  return "?";
}

void PruningSchedule::validate() const {
  if (initial_sparsity < 0.0 || initial_sparsity >= 1.0)
    throw ConfigError("pruning schedule: s_i must lie in [0, 1), got " + std::to_string(initial_sparsity));
  if (final_sparsity < 0.0 || final_sparsity > 1.0)
    throw ConfigError("pruning schedule: s_f must lie in [0, 1], got " + std::to_string(final_sparsity));
  if (initial_sparsity > final_sparsity) throw ConfigError("pruning schedule: s_i must not exceed s_f");
  if (start_step < 0) throw ConfigError("pruning schedule: t0 must be non-negative");
  if (num_prune_steps <= 0) throw ConfigError("pruning schedule: n must be positive");
  if (prune_every <= 0) throw ConfigError("pruning schedule: delta_t must be positive");
}

double PruningSchedule::sparsity_at(int64_t t) const {
  // Clamped branches keep the endpoints exact in floating point.
  if (t <= start_step) return initial_sparsity;
  if (t >= end_step()) return final_sparsity;
  const double span = double(num_prune_steps) * double(prune_every);
  const double u = double(t - start_step) / span;
  const double w = 1.0 - u;
  return final_sparsity + (initial_sparsity - final_sparsity) * (w * w * w);
}

int64_t target_zero_count(double sparsity, int64_t n_elems) {
  int64_t z = int64_t(std::floor(sparsity * double(n_elems) + 0.5));
  return std::clamp<int64_t>(z, 0, n_elems);
}

}  // namespace pruneforge
