#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "ecvis/autodiff.hpp"

namespace ecvis::ad {

struct GradReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t n_checked = 0;
};

/// Builds a scalar on `tape` from the input node `x`.
using TapedFn = std::function<Var(Tape& tape, Var x)>;
using ValueFn = std::function<double(const TensorD& x)>;

/// Relative error |a - b| / max(|a|, |b|, 1e-8).
double relative_error(double a, double b);

/// Central differences (f(x+e) - f(x-e)) / (2 eps) against `analytic`, per
/// coordinate. `coords` restricts the check to a subset (all when empty).
GradReport gradcheck(const ValueFn& f, const TensorD& analytic, const TensorD& x, double eps,
                     std::span<const std::size_t> coords = {});

/// Same check with the analytic gradient taken from a reverse pass over `f`.
GradReport gradcheck(const TapedFn& f, const TensorD& x, double eps,
                     std::span<const std::size_t> coords = {});

}  // namespace ecvis::ad
