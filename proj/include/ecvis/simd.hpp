#pragma once

#include <cstddef>
#include <string_view>

// Inner-loop kernels with a scalar reference and vector variants chosen at
// runtime. Every variant reproduces the scalar reference bit for bit: the
// reductions use a fixed lane-striped accumulation order that the scalar code
// mirrors, and no variant contracts multiply-add pairs.
namespace ecvis::simd {

enum class Level { Scalar, Avx2, Neon };

struct Kernels {
  // sum_i x[i] * y[i], accumulated in 4 lanes by i mod 4
  double (*dot)(const double* x, const double* y, std::size_t n);
  // Givens update: x <- c*x - s*y, y <- s*x + c*y
  void (*rotate)(double* x, double* y, std::size_t n, double c, double s);
  // sum_i (a[i] - b[i])^2, accumulated in 8 float lanes by i mod 8
  float (*sum_sq_diff)(const float* a, const float* b, std::size_t n);
  // out[i*n + j] = e[i]*e[j] if that product is > 0, else 0
  void (*outer_positive)(const double* e, std::size_t n, double* out);
};

bool available(Level level);
const Kernels& kernels(Level level);

/// Kernels for the active level. The first call picks the best available
/// level unless ECVIS_SIMD=scalar|avx2|neon overrides it.
const Kernels& kernels();
Level active_level();
void set_level(Level level);
std::string_view level_name(Level level);

namespace scalar {
double dot(const double* x, const double* y, std::size_t n);
void rotate(double* x, double* y, std::size_t n, double c, double s);
float sum_sq_diff(const float* a, const float* b, std::size_t n);
void outer_positive(const double* e, std::size_t n, double* out);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
double dot(const double* x, const double* y, std::size_t n);
void rotate(double* x, double* y, std::size_t n, double c, double s);
float sum_sq_diff(const float* a, const float* b, std::size_t n);
void outer_positive(const double* e, std::size_t n, double* out);
}  // namespace avx2
#endif

#if defined(__aarch64__)
namespace neon {
double dot(const double* x, const double* y, std::size_t n);
void rotate(double* x, double* y, std::size_t n, double c, double s);
float sum_sq_diff(const float* a, const float* b, std::size_t n);
void outer_positive(const double* e, std::size_t n, double* out);
}  // namespace neon
#endif

}  // namespace ecvis::simd
