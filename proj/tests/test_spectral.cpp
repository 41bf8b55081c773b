#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "ecvis/rng.hpp"
#include "ecvis/spectral.hpp"
#include "oracles.hpp"

using namespace ecvis;
using namespace ecvis::spectral;

namespace {

InstanceFeatureVector random_features(Rng& rng, std::size_t n) {
  InstanceFeatureVector e;
  for (std::size_t i = 0; i < n; ++i) {
    e.values.push_back(rng.uniform(0.2, 1.5) * (rng.uniform() < 0.25 ? -1.0 : 1.0));
  }
  return e;
}

LaplacianMatrix from_entries(std::size_t n, std::vector<double> entries) {
  LaplacianMatrix l;
  l.n = n;
  l.entries = std::move(entries);
  return l;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::IoFailure;
}

}  // namespace

TEST_CASE("prepare_instance_features examples") {
  const auto c = prepare_instance_features(TensorD({4, 4}, 0.5), 4);
  CHECK(c.values == std::vector<double>(4, 0.5));

  TensorD m({4, 4});
  std::iota(m.values().begin(), m.values().end(), 0.0);
  CHECK(prepare_instance_features(m, 1).values == m.storage());

  TensorD blocks({4, 4});
  for (std::size_t y = 0; y < 4; ++y) {
    for (std::size_t x = 0; x < 4; ++x) blocks.at(y, x) = 1.0 + 2.0 * (y / 2) + (x / 2);
  }
  CHECK(prepare_instance_features(blocks, 4).values == std::vector<double>{1, 2, 3, 4});

  CHECK(code_of([] { prepare_instance_features(TensorD({4, 4}), 2); }) == ErrorCode::BadScale);
  CHECK(code_of([] { prepare_instance_features(TensorD({6, 4}), 16); }) == ErrorCode::NotDivisible);
}

TEST_CASE("affinity examples and invariants") {
  const AffinityMatrix a = affinity({{1, -1, 2}});
  CHECK(a.entries == std::vector<double>{1, 0, 2, 0, 1, 0, 2, 0, 4});
  for (double v : affinity({{0, 0, 0}}).entries) CHECK(v == 0.0);
  const InstanceFeatureVector pos{{0.5, 1.5, 2.0}};
  const AffinityMatrix ap = affinity(pos);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) CHECK(ap(i, j) == pos.values[i] * pos.values[j]);
  }

  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto e = random_features(rng, 2 + rng.below(20));
    const AffinityMatrix r = affinity(e);
    for (std::size_t i = 0; i < r.n; ++i) {
      CHECK(r(i, i) == e.values[i] * e.values[i]);
      for (std::size_t j = 0; j < r.n; ++j) {
        CHECK(r(i, j) >= 0.0);
        CHECK(std::abs(r(i, j) - r(j, i)) <= 1e-7);
      }
    }
  }
}

TEST_CASE("affinity scales quadratically") {
  Rng rng(6);
  const auto e = random_features(rng, 12);
  InstanceFeatureVector scaled = e;
  for (double& v : scaled.values) v *= 3.0;
  const auto a = affinity(e), b = affinity(scaled);
  for (std::size_t k = 0; k < a.entries.size(); ++k) CHECK(b.entries[k] == doctest::Approx(9.0 * a.entries[k]));
  const auto pa = feature_spectrum(e, 4), pb = feature_spectrum(scaled, 4);
  for (std::size_t k = 0; k < 4; ++k) CHECK(pb.values[k] == doctest::Approx(9.0 * pa.values[k]).epsilon(1e-9));
}

TEST_CASE("laplacian examples") {
  const LaplacianMatrix l = laplacian(affinity({{1, -1, 2}}));
  CHECK(l.entries == std::vector<double>{2, 0, -2, 0, 0, 0, -2, 0, 2});

  AffinityMatrix zero;
  zero.n = 3;
  zero.entries.assign(9, 0.0);
  for (double v : laplacian(zero).entries) CHECK(v == 0.0);

  AffinityMatrix ones;
  ones.n = 3;
  ones.entries.assign(9, 1.0);
  CHECK(laplacian(ones).entries == std::vector<double>{2, -1, -1, -1, 2, -1, -1, -1, 2});
}

TEST_CASE("laplacian invariants") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const LaplacianMatrix l = laplacian(affinity(random_features(rng, 2 + rng.below(30))));
    for (std::size_t i = 0; i < l.n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < l.n; ++j) {
        row += l(i, j);
        CHECK(std::abs(l(i, j) - l(j, i)) <= 1e-7);
      }
      CHECK(std::abs(row) <= 1e-6);
    }
  }
}

TEST_CASE("smallest_eigenvalues examples") {
  const auto complete = smallest_eigenvalues(from_entries(3, {2, -1, -1, -1, 2, -1, -1, -1, 2}), 3);
  CHECK(complete.values[0] == doctest::Approx(0.0));
  CHECK(complete.values[1] == doctest::Approx(3.0));
  CHECK(complete.values[2] == doctest::Approx(3.0));

  const auto hand = smallest_eigenvalues(laplacian(affinity({{1, -1, 2}})), 3);
  CHECK(std::abs(hand.values[0]) <= 1e-12);
  CHECK(std::abs(hand.values[1]) <= 1e-12);
  CHECK(hand.values[2] == doctest::Approx(4.0));

  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = feature_spectrum(random_features(rng, 2 + rng.below(30)), 1);
    CHECK(std::abs(p.values[0]) <= 1e-8);
  }

  CHECK(code_of([] { smallest_eigenvalues(from_entries(2, {1, 0, 0, 1}), 3); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("random Laplacians: zero first eigenvalue, PSD, trace") {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(63);
    const LaplacianMatrix l = laplacian(affinity(random_features(rng, n)));
    const EigenPack p = smallest_eigenvalues(l, std::min<std::size_t>(3, n));
    CHECK(std::abs(p.values[0]) <= 1e-8);
    double trace = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) trace += l(i, i);
    for (double v : p.spectrum) {
      CHECK(v >= -1e-8);
      sum += v;
    }
    CHECK(std::abs(sum - trace) <= 1e-6);
    for (std::size_t k = 0; k + 1 < p.values.size(); ++k) CHECK(p.values[k] <= p.values[k + 1]);
    for (const auto& v : p.vectors) {
      double norm = 0.0;
      for (double x : v) norm += x * x;
      CHECK(std::abs(std::sqrt(norm) - 1.0) <= 1e-7);
    }
  }
}

TEST_CASE("jacobi matches the 3x3 characteristic polynomial") {
  Rng rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> a(9);
    if (trial % 2 == 0) {
      a = laplacian(affinity(random_features(rng, 3))).entries;
    } else {
      for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = i; j < 3; ++j) a[i * 3 + j] = a[j * 3 + i] = rng.uniform(-2, 2);
      }
    }
    const auto expect = oracle::cubic_eigenvalues(a);
    const auto got = jacobi_eigen(a, 3);
    for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(got.values[k] - expect[k]) <= 1e-8);
  }
}

TEST_CASE("full spectrum matches an inertia-count bisection up to 8x8") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 3 + rng.below(6);
    const LaplacianMatrix l = laplacian(affinity(random_features(rng, n)));
    const auto expect = oracle::bisection_eigenvalues(l.entries, n);
    const auto got = smallest_eigenvalues(l, n);
    for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(got.values[k] - expect[k]) <= 1e-9);
  }
}

TEST_CASE("eigenvalue_grad examples") {
  const LaplacianMatrix d = from_entries(3, {1, 0, 0, 0, 2, 0, 0, 0, 3});
  const EigenPack p = smallest_eigenvalues(d, 3);
  CHECK(p.values == std::vector<double>{1, 2, 3});
  const TensorD g = eigenvalue_grad(d, p, 1);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(g.at(i, j)) == (i == 1 && j == 1 ? 1.0 : 0.0));
  }

  // lambda_1 is identically zero, so its chained feature gradient is too.
  Rng rng(9);
  const auto e = random_features(rng, 16);
  ad::Tape tape;
  TensorD x({16}, e.values);
  ad::Var in = tape.input("x", x);
  ad::Var ev = spectral::laplacian_eigenvalues(tape, in, 3);
  const TensorD grad = tape.backward(tape.gather(ev, {0}, Dims{1}))["x"];
  for (double v : grad.values()) CHECK(v == 0.0);
}

TEST_CASE("eigenvalue_grad matches finite differences on 8x8 Laplacians") {
  Rng rng(10);
  int done = 0;
  while (done < 20) {
    const LaplacianMatrix l = laplacian(affinity(random_features(rng, 8)));
    const EigenPack p = smallest_eigenvalues(l, 8);
    const std::size_t k = 1 + rng.below(7);
    if (p.gaps[k] <= 1e-3) continue;
    const TensorD g = eigenvalue_grad(l, p, k);
    const double h = 1e-4;  // smaller steps drown the tiny diagonal entries in roundoff
    double worst = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
      for (std::size_t j = i; j < 8; ++j) {
        // symmetric perturbation of (i, j) and (j, i)
        auto eval = [&](double delta) {
          LaplacianMatrix q = l;
          q(i, j) += delta;
          if (i != j) q(j, i) += delta;
          return smallest_eigenvalues(q, 8).values[k];
        };
        const double numeric = (eval(h) - eval(-h)) / (2 * h);
        const double analytic = i == j ? g.at(i, i) : g.at(i, j) + g.at(j, i);
        worst = std::max(worst, std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-8}));
      }
    }
    CHECK(worst < 1e-4);
    ++done;
  }
}

TEST_CASE("degenerate eigenvalues refuse a gradient") {
  const LaplacianMatrix l = from_entries(3, {2, -1, -1, -1, 2, -1, -1, -1, 2});
  const EigenPack p = smallest_eigenvalues(l, 3);
  CHECK(code_of([&] { eigenvalue_grad(l, p, 1); }) == ErrorCode::DegenerateEigenvalue);
}

TEST_CASE("jacobi failure modes") {
  const std::vector<double> m = {1, 2, 2, 1};
  CHECK(code_of([&] { jacobi_eigen(m, 2, 0); }) == ErrorCode::NoConvergence);
  const std::vector<double> bad = {1, std::numeric_limits<double>::quiet_NaN(), 0, 1};
  CHECK(code_of([&] { jacobi_eigen(bad, 2); }) == ErrorCode::NonFiniteValue);
}

TEST_CASE("jacobi converges on large-magnitude matrices") {
  Rng rng(11);
  auto e = random_features(rng, 16);
  for (double& v : e.values) v *= 1e6;
  const EigenPack p = feature_spectrum(e, 3);
  CHECK(p.values[0] == 0.0);
  CHECK(p.values[2] > 0.0);
}
