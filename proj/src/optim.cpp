#include "pruneforge/optim.hpp"

namespace pruneforge {

void OptimizerConfig::validate() const {
  if (kind == OptKind::Momentum && (momentum < 0.0 || momentum >= 1.0))
    throw ConfigError("optimizer: momentum must lie in [0, 1), got " + std::to_string(momentum));
  if (clip_norm && !(*clip_norm > 0)) throw ConfigError("optimizer: clip_norm must be positive");
  if (weight_decay && *weight_decay < 0) throw ConfigError("optimizer: weight_decay must be non-negative");
}

double LrSchedule::at(int64_t t) const {
  switch (kind) {
    case Kind::Constant:
      return base;
    case Kind::ExpDecay:
      return base * std::pow(rate, double(t) / double(every));
    case Kind::StepDecay: {
      if (t < start) return base;
      int64_t k = (t - start) / every + 1;
      return base * std::pow(rate, double(k));
    }
  }
  return base;
}

void LrSchedule::validate() const {
  if (!(base > 0)) throw ConfigError("lr schedule: base rate must be positive");
  if (every <= 0) throw ConfigError("lr schedule: decay period must be positive");
  if (start < 0) throw ConfigError("lr schedule: start step must be non-negative");
  if (kind == Kind::ExpDecay && !(rate > 0 && rate <= 1))
    throw ConfigError("lr schedule: exp decay rate must lie in (0, 1]");
  if (kind == Kind::StepDecay && !(rate > 0 && rate < 1))
    throw ConfigError("lr schedule: step decay factor must lie in (0, 1)");
}

}  // namespace pruneforge
