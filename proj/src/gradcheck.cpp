#include "ecvis/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ecvis::ad {

double relative_error(double a, double b) {
  const double denom = std::max({std::fabs(a), std::fabs(b), 1e-8});
  return std::fabs(a - b) / denom;
}

GradReport gradcheck(const ValueFn& f, const TensorD& analytic, const TensorD& x, double eps,
                     std::span<const std::size_t> coords) {
  if (!(eps >= 1e-5 && eps <= 1e-2)) {
    throw Error(ErrorCode::BadConfig, "gradcheck eps must lie in [1e-5, 1e-2]");
  }
  if (analytic.size() != x.size()) {
    throw Error(ErrorCode::ShapeMismatch, "analytic gradient does not match input shape");
  }
  GradReport report;
  TensorD probe = x;
  auto check = [&](std::size_t i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double up = f(probe);
    probe[i] = orig - eps;
    const double down = f(probe);
    probe[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down) || !std::isfinite(analytic[i])) {
      throw Error(ErrorCode::NonFiniteValue, "non-finite value at coordinate " + std::to_string(i));
    }
    const double numeric = (up - down) / (2.0 * eps);
    const double err = relative_error(analytic[i], numeric);
    if (report.n_checked == 0 || err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_index = i;
      report.worst_analytic = analytic[i];
      report.worst_numeric = numeric;
    }
    ++report.n_checked;
  };
  if (coords.empty()) {
    for (std::size_t i = 0; i < x.size(); ++i) check(i);
  } else {
    for (std::size_t i : coords) {
      if (i >= x.size()) throw Error(ErrorCode::ShapeMismatch, "gradcheck coordinate out of range");
      check(i);
    }
  }
  return report;
}

GradReport gradcheck(const TapedFn& f, const TensorD& x, double eps,
                     std::span<const std::size_t> coords) {
  Tape tape;
  const Var in = tape.input("x", x);
  const Var out = f(tape, in);
  const TensorD analytic = tape.backward(out)["x"];
  auto value = [&f](const TensorD& at) {
    Tape t;
    return t.scalar(f(t, t.input("x", at)));
  };
  return gradcheck(value, analytic, x, eps, coords);
}

}  // namespace ecvis::ad
