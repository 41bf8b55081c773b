#include <doctest.h>

#include <cstring>
#include <vector>

#include "ecvis/rng.hpp"
#include "ecvis/simd.hpp"

using namespace ecvis;
using simd::Level;

namespace {

std::vector<Level> vector_levels() {
  std::vector<Level> out;
  for (Level l : {Level::Avx2, Level::Neon}) {
    if (simd::available(l)) out.push_back(l);
  }
  return out;
}

template <class T>
bool same_bits(const std::vector<T>& a, const std::vector<T>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

}  // namespace

TEST_CASE("scalar level is always available") {
  CHECK(simd::available(Level::Scalar));
  CHECK(simd::level_name(Level::Scalar) == "scalar");
}

TEST_CASE("vector kernels match the scalar reference bit for bit") {
  const auto& ref = simd::kernels(Level::Scalar);
  const auto levels = vector_levels();
  if (levels.empty()) MESSAGE("no vector level on this host; scalar only");
  Rng rng(17);
  for (Level level : levels) {
    CAPTURE(simd::level_name(level));
    const auto& k = simd::kernels(level);
    for (std::size_t n = 0; n < 70; ++n) {
      CAPTURE(n);
      std::vector<double> x(n), y(n);
      std::vector<float> a(n), b(n);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.normal();
        y[i] = rng.normal();
        a[i] = static_cast<float>(rng.uniform());
        b[i] = static_cast<float>(rng.uniform());
      }

      const double d0 = ref.dot(x.data(), y.data(), n), d1 = k.dot(x.data(), y.data(), n);
      CHECK(std::memcmp(&d0, &d1, sizeof d0) == 0);

      const float s0 = ref.sum_sq_diff(a.data(), b.data(), n), s1 = k.sum_sq_diff(a.data(), b.data(), n);
      CHECK(std::memcmp(&s0, &s1, sizeof s0) == 0);

      auto x0 = x, y0 = y, x1 = x, y1 = y;
      const double c = 0.8, s = 0.6;
      ref.rotate(x0.data(), y0.data(), n, c, s);
      k.rotate(x1.data(), y1.data(), n, c, s);
      CHECK(same_bits(x0, x1));
      CHECK(same_bits(y0, y1));

      std::vector<double> o0(n * n), o1(n * n);
      ref.outer_positive(x.data(), n, o0.data());
      k.outer_positive(x.data(), n, o1.data());
      CHECK(same_bits(o0, o1));
    }
  }
}

TEST_CASE("scalar kernels compute what they document") {
  const std::vector<double> x = {1, 2, 3, 4, 5}, y = {5, 4, 3, 2, 1};
  CHECK(simd::scalar::dot(x.data(), y.data(), 5) == 35.0);
  const std::vector<float> a = {1, 2, 3}, b = {0, 0, 1};
  CHECK(simd::scalar::sum_sq_diff(a.data(), b.data(), 3) == 9.0f);
  const std::vector<double> e = {1, -1, 2};
  std::vector<double> out(9);
  simd::scalar::outer_positive(e.data(), 3, out.data());
  CHECK(out == std::vector<double>{1, 0, 2, 0, 1, 0, 2, 0, 4});
  std::vector<double> p = {1, 0}, q = {0, 1};
  simd::scalar::rotate(p.data(), q.data(), 2, 0.0, 1.0);
  CHECK(p == std::vector<double>{0, -1});
  CHECK(q == std::vector<double>{1, 0});
}

TEST_CASE("set_level switches the active table") {
  const Level before = simd::active_level();
  simd::set_level(Level::Scalar);
  CHECK(simd::active_level() == Level::Scalar);
  CHECK(&simd::kernels() == &simd::kernels(Level::Scalar));
  simd::set_level(before);
  CHECK(simd::active_level() == before);
}
