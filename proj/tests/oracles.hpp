// Test-only oracles, kept independent of the library's backward paths:
// central finite differences for gradients plus small dense reference
// routines.
#pragma once

#include <cmath>
#include <functional>

#include "pruneforge/tensor.hpp"

namespace pruneforge::testing {

// Central finite difference of `loss` with respect to one scalar slot.
inline double central_diff(const std::function<double()>& loss, double* slot, double h = 1e-5) {
  const double orig = *slot;
  *slot = orig + h;
  const double lp = loss();
  *slot = orig - h;
  const double lm = loss();
  *slot = orig;
  return (lp - lm) / (2.0 * h);
}

struct FdReport {
  int checked = 0;
  int masked_zero = 0;
  double worst_rel = 0.0;
  bool ok = true;
};

// Compare an analytic gradient tensor against finite differences of `loss`
// with respect to `param`'s storage. Entries with |analytic| <= skip_below
// are not given a relative-error check; entries listed as masked must be
// exactly zero.
inline FdReport check_gradient_fd(const Tensor<double>& analytic, Tensor<double>& param,
                                  const std::function<double()>& loss, double tol = 1e-4,
                                  double skip_below = 1e-8,
                                  const std::function<bool(int64_t)>& is_masked = nullptr) {
  FdReport rep;
  for (int64_t i = 0; i < param.numel(); ++i) {
    const double a = analytic.at(i);
    if (is_masked && is_masked(i)) {
      ++rep.masked_zero;
      if (a != 0.0) rep.ok = false;
      continue;
    }
    if (std::fabs(a) <= skip_below) continue;
    const double fd = central_diff(loss, &param.at(i));
    const double rel = std::fabs(a - fd) / std::max(std::fabs(a), std::fabs(fd));
    rep.worst_rel = std::max(rep.worst_rel, rel);
    ++rep.checked;
    if (rel > tol) rep.ok = false;
  }
  return rep;
}

}  // namespace pruneforge::testing
