#include <arm_neon.h>

#include "ecvis/simd.hpp"

namespace ecvis::simd::neon {

double dot(const double* x, const double* y, std::size_t n) {
  float64x2_t lo = vdupq_n_f64(0.0);
  float64x2_t hi = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    lo = vaddq_f64(lo, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
    hi = vaddq_f64(hi, vmulq_f64(vld1q_f64(x + i + 2), vld1q_f64(y + i + 2)));
  }
  double lanes[4];
  vst1q_f64(lanes, lo);
  vst1q_f64(lanes + 2, hi);
  for (; i < n; ++i) lanes[i & 3] += x[i] * y[i];
  return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

void rotate(double* x, double* y, std::size_t n, double c, double s) {
  const float64x2_t vc = vdupq_n_f64(c);
  const float64x2_t vs = vdupq_n_f64(s);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t xi = vld1q_f64(x + i);
    const float64x2_t yi = vld1q_f64(y + i);
    vst1q_f64(x + i, vsubq_f64(vmulq_f64(vc, xi), vmulq_f64(vs, yi)));
    vst1q_f64(y + i, vaddq_f64(vmulq_f64(vs, xi), vmulq_f64(vc, yi)));
  }
  for (; i < n; ++i) {
    const double xi = x[i];
    const double yi = y[i];
    x[i] = c * xi - s * yi;
    y[i] = s * xi + c * yi;
  }
}

float sum_sq_diff(const float* a, const float* b, std::size_t n) {
  float32x4_t lo = vdupq_n_f32(0.f);
  float32x4_t hi = vdupq_n_f32(0.f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const float32x4_t d0 = vsubq_f32(vld1q_f32(a + i), vld1q_f32(b + i));
    const float32x4_t d1 = vsubq_f32(vld1q_f32(a + i + 4), vld1q_f32(b + i + 4));
    lo = vaddq_f32(lo, vmulq_f32(d0, d0));
    hi = vaddq_f32(hi, vmulq_f32(d1, d1));
  }
  float lanes[8];
  vst1q_f32(lanes, lo);
  vst1q_f32(lanes + 4, hi);
  for (; i < n; ++i) {
    const float d = a[i] - b[i];
    lanes[i & 7] += d * d;
  }
  return ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
         ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
}

void outer_positive(const double* e, std::size_t n, double* out) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const float64x2_t ei = vdupq_n_f64(e[i]);
    double* row = out + i * n;
    std::size_t j = 0;
    for (; j + 2 <= n; j += 2) {
      const float64x2_t p = vmulq_f64(ei, vld1q_f64(e + j));
      const uint64x2_t keep = vcgtq_f64(p, zero);
      vst1q_f64(row + j, vreinterpretq_f64_u64(vandq_u64(vreinterpretq_u64_f64(p), keep)));
    }
    for (; j < n; ++j) {
      const double p = e[i] * e[j];
      row[j] = p > 0.0 ? p : 0.0;
    }
  }
}

}  // namespace ecvis::simd::neon
