#include <doctest.h>

#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <map>
#include <string>

#include "ecvis/autodiff.hpp"
#include "ecvis/gradcheck.hpp"
#include "ecvis/rng.hpp"
#include "ecvis/spectral.hpp"

using namespace ecvis;
using namespace ecvis::ad;

namespace {

TensorD vec(std::initializer_list<double> v) { return TensorD({v.size()}, std::vector<double>(v)); }

TensorD random_tensor(Dims dims, Rng& rng, double lo, double hi) {
  TensorD t(std::move(dims));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  // keep away from the kinks of abs and log
  for (double& v : t.values()) {
    if (std::abs(v) < 1e-2) v = v < 0 ? -0.05 : 0.05;
  }
  return t;
}

double eval(std::string_view expr, const std::map<std::string, TensorD>& in) {
  Tape tape;
  Var root;
  tape_eval(expr, in, &tape, &root);
  return tape.scalar(root);
}

// Weighted sum of an op output so every output element carries a distinct
// upstream gradient.
TapedFn weighted(std::function<Var(Tape&, Var)> op, TensorD weights) {
  return [op, weights](Tape& tape, Var x) {
    Var y = op(tape, x);
    return tape.sum(tape.mul(y, tape.constant(weights.reshaped(tape.value(y).dims()))));
  };
}

}  // namespace

TEST_CASE("tape_eval examples") {
  CHECK(eval("(sigmoid x)", {{"x", TensorD({}, std::vector<double>{0.0})}}) == 0.5);
  CHECK(eval("(log x)", {{"x", TensorD({}, std::vector<double>{1.0})}}) == 0.0);
  CHECK(eval("(dot a b)", {{"a", vec({1, 2})}, {"b", vec({3, 4})}}) == 11.0);
}

TEST_CASE("tape_eval equals direct evaluation bit for bit") {
  Rng rng(21);
  const std::map<std::string, TensorD> in = {{"x", random_tensor({2, 4, 4}, rng, -2, 2)},
                                             {"y", random_tensor({2, 4, 4}, rng, 0.5, 2)},
                                             {"m", random_tensor({3, 2}, rng, -1, 1)},
                                             {"n", random_tensor({2, 5}, rng, -1, 1)}};
  const char* exprs[] = {
      "(mean (mul x (sigmoid y)))",
      "(sum (div (abs x) (power y 1.5)))",
      "(sum (log (add y (clamp_min x 0.2))))",
      "(mean (area_downsample (sub x y) 2))",
      "(sum (gather x 0 5 7 31))",
      "(sum (matmul m n))",
      "(dot (reshape x 32) (reshape y 32))",
  };
  for (const char* e : exprs) {
    CAPTURE(e);
    const TensorD a = tape_eval(e, in), b = direct_eval(e, in);
    REQUIRE(a.dims() == b.dims());
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("tape_eval rejects unknown ops and bad shapes") {
  const std::map<std::string, TensorD> in = {{"a", vec({1, 2})}, {"b", vec({1, 2, 3})}};
  CHECK_THROWS_WITH_AS(tape_eval("(tanh a)", in), doctest::Contains("unsupported"), Error);
  try {
    tape_eval("(add a b)", in);
    FAIL("shape mismatch accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
}

TEST_CASE("backprop examples") {
  {
    Tape t;
    Var x = t.input("x", TensorD({}, std::vector<double>{2.0}));
    Var y = t.input("y", TensorD({}, std::vector<double>{3.0}));
    CHECK(t.backward(t.mul(x, y))["x"][0] == 3.0);
  }
  {
    Tape t;
    Var x = t.input("x", TensorD({}, std::vector<double>{0.0}));
    CHECK(t.backward(t.sigmoid(x))["x"][0] == 0.25);
  }
  {
    Tape t;
    Var x = t.input("x", vec({1, 2, 3, 4}));
    const TensorD g = t.backward(t.mean(x))["x"];
    for (double v : g.values()) CHECK(v == 0.25);
  }
}

TEST_CASE("inputs off the path get exact zeros") {
  Tape t;
  Var x = t.input("x", vec({1, 2}));
  Var unused = t.input("u", vec({5, 6, 7}));
  (void)unused;
  const Gradients g = t.backward(t.sum(x));
  CHECK(g["u"].dims() == Dims{3});
  for (double v : g["u"].values()) CHECK(v == 0.0);
}

TEST_CASE("backward needs a scalar output") {
  Tape t;
  Var x = t.input("x", vec({1, 2}));
  try {
    t.backward(t.sigmoid(x));
    FAIL("non-scalar accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonScalarOutput);
  }
}

TEST_CASE("tape is topologically ordered and passes are independent") {
  Tape t;
  Var x = t.input("x", vec({0.5, -1.0}));
  Var out = t.sum(t.mul(t.sigmoid(x), x));
  for (std::size_t id = 0; id < t.size(); ++id) {
    for (std::size_t p : t.parents(Var{id})) CHECK(p < id);
  }
  const TensorD g1 = t.backward(out)["x"];
  const TensorD g2 = t.backward(out)["x"];
  CHECK(g1 == g2);
}

TEST_CASE("gradients are linear in the seed") {
  Rng rng(4);
  Tape t;
  Var x = t.input("x", random_tensor({2, 4, 4}, rng, 0.2, 2.0));
  Var w = t.input("w", random_tensor({2, 4, 4}, rng, -1, 1));
  Var out = t.mean(t.mul(t.area_downsample(t.log(t.add(x, t.sigmoid(w))), 2), t.abs(t.area_downsample(w, 2))));
  const std::vector<TensorD> a1 = t.adjoints(out, 1.0), a2 = t.adjoints(out, 2.0);
  for (std::size_t n = 0; n < a1.size(); ++n) {
    for (std::size_t k = 0; k < a1[n].size(); ++k) CHECK(std::abs(a2[n][k] - 2.0 * a1[n][k]) <= 1e-7);
  }
}

TEST_CASE("every primitive passes gradcheck on random inputs") {
  Rng rng(8);
  struct Case {
    const char* name;
    std::function<Var(Tape&, Var)> op;
    Dims in_dims;
    double lo, hi;
  };
  for (int trial = 0; trial < 20; ++trial) {
    const TensorD other = random_tensor({2, 4, 4}, rng, 0.5, 2.0);
    const TensorD mat = random_tensor({4, 3}, rng, -1, 1);
    const std::vector<Case> cases = {
        {"add", [&](Tape& t, Var x) { return t.add(x, t.constant(other)); }, {2, 4, 4}, -2, 2},
        {"sub", [&](Tape& t, Var x) { return t.sub(t.constant(other), x); }, {2, 4, 4}, -2, 2},
        {"mul", [&](Tape& t, Var x) { return t.mul(x, t.constant(other)); }, {2, 4, 4}, -2, 2},
        {"div numerator", [&](Tape& t, Var x) { return t.div(x, t.constant(other)); }, {2, 4, 4}, -2, 2},
        {"div denominator", [&](Tape& t, Var x) { return t.div(t.constant(other), x); }, {2, 4, 4}, 0.5, 2},
        {"dot", [&](Tape& t, Var x) { return t.dot(x, t.constant(other.reshaped({32}))); }, {32}, -2, 2},
        {"matmul left", [&](Tape& t, Var x) { return t.matmul(x, t.constant(mat)); }, {2, 4}, -2, 2},
        {"matmul right", [&](Tape& t, Var x) { return t.matmul(t.constant(mat), x); }, {3, 5}, -2, 2},
        {"sigmoid", [](Tape& t, Var x) { return t.sigmoid(x); }, {2, 4, 4}, -4, 4},
        {"log", [](Tape& t, Var x) { return t.log(x); }, {2, 4, 4}, 1e-2, 3},
        {"mean", [](Tape& t, Var x) { return t.mean(x); }, {2, 4, 4}, -2, 2},
        {"sum", [](Tape& t, Var x) { return t.sum(x); }, {2, 4, 4}, -2, 2},
        {"abs", [](Tape& t, Var x) { return t.abs(x); }, {2, 4, 4}, -2, 2},
        {"power", [](Tape& t, Var x) { return t.power(x, 2.5); }, {2, 4, 4}, 0.1, 2},
        {"area_downsample", [](Tape& t, Var x) { return t.area_downsample(x, 2); }, {2, 4, 4}, -2, 2},
        {"gather", [](Tape& t, Var x) { return t.gather(x, {0, 3, 3, 17, 31}, Dims{5}); }, {2, 4, 4}, -2, 2},
        {"clamp_min", [](Tape& t, Var x) { return t.clamp_min(x, 0.3); }, {2, 4, 4}, -2, 2},
        {"reshape", [](Tape& t, Var x) { return t.reshape(x, {8, 4}); }, {2, 4, 4}, -2, 2},
    };
    for (const Case& c : cases) {
      CAPTURE(c.name);
      TensorD x = random_tensor(c.in_dims, rng, c.lo, c.hi);
      if (std::string(c.name) == "clamp_min") {
        for (double& v : x.values()) {
          if (std::abs(v - 0.3) < 1e-2) v += 0.05;
        }
      }
      Tape probe;
      const Dims out_dims = probe.value(c.op(probe, probe.input("x", x))).dims();
      const TensorD w = random_tensor({dims_product(out_dims)}, rng, -1, 1);
      const GradReport r = gradcheck(weighted(c.op, w), x, 1e-5);
      CHECK(r.max_rel_error < 1e-5);
      CHECK(r.n_checked == x.size());
    }
  }
}

TEST_CASE("gradcheck examples") {
  const GradReport sq = gradcheck(
      [](Tape& t, Var x) { return t.sum(t.mul(x, x)); }, vec({1, 2, 3}), 1e-4);
  CHECK(sq.max_rel_error < 1e-6);
  CHECK(sq.max_rel_error >= 0.0);

  const GradReport flat = gradcheck([](Tape& t, Var) { return t.constant(3.0); }, vec({1, 2, 3}), 1e-4);
  CHECK(flat.max_rel_error == 0.0);

  Rng rng(12);
  int done = 0;
  while (done < 5) {
    TensorD e({8});
    for (double& v : e.values()) v = rng.uniform(0.2, 1.5) * (rng.uniform() < 0.25 ? -1.0 : 1.0);
    spectral::InstanceFeatureVector fv{std::vector<double>(e.values().begin(), e.values().end())};
    const auto pack = spectral::feature_spectrum(fv, 3);
    if (pack.gaps[1] <= 1e-3 || pack.gaps[2] <= 1e-3 || pack.values[1] < 1e-3) continue;
    const GradReport r = gradcheck(
        [](Tape& t, Var x) { return t.sum(spectral::laplacian_eigenvalues(t, x, 3)); }, e, 1e-5);
    CHECK(r.max_rel_error < 1e-4);
    ++done;
  }
}

TEST_CASE("gradcheck reports non-finite evaluations") {
  const ValueFn f = [](const TensorD& x) { return x[0] > 1.0 ? std::numeric_limits<double>::quiet_NaN() : 0.0; };
  try {
    gradcheck(f, vec({0.0}), vec({1.0}), 1e-4);
    FAIL("NaN accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteValue);
  }
}

TEST_CASE("relative error denominator") {
  CHECK(relative_error(0.0, 0.0) == 0.0);
  CHECK(relative_error(1e-9, 0.0) == doctest::Approx(0.1));
  CHECK(relative_error(2.0, 1.0) == doctest::Approx(0.5));
}
