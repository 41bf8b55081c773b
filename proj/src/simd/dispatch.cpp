#include <atomic>
#include <cstdlib>
#include <string>

#include "ecvis/error.hpp"
#include "ecvis/simd.hpp"

namespace ecvis::simd {
namespace {

constexpr Kernels kScalar{&scalar::dot, &scalar::rotate, &scalar::sum_sq_diff,
                          &scalar::outer_positive};
#if defined(__x86_64__) || defined(_M_X64)
constexpr Kernels kAvx2{&avx2::dot, &avx2::rotate, &avx2::sum_sq_diff, &avx2::outer_positive};
#endif
#if defined(__aarch64__)
constexpr Kernels kNeon{&neon::dot, &neon::rotate, &neon::sum_sq_diff, &neon::outer_positive};
#endif

Level best_level() {
  if (const char* env = std::getenv("ECVIS_SIMD")) {
    const std::string want(env);
    if (want == "scalar") return Level::Scalar;
    if (want == "avx2" && available(Level::Avx2)) return Level::Avx2;
    if (want == "neon" && available(Level::Neon)) return Level::Neon;
  }
  if (available(Level::Avx2)) return Level::Avx2;
  if (available(Level::Neon)) return Level::Neon;
  return Level::Scalar;
}

std::atomic<int>& current() {
  static std::atomic<int> level{static_cast<int>(best_level())};
  return level;
}

}  // namespace

bool available(Level level) {
  switch (level) {
    case Level::Scalar: return true;
    case Level::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Level::Neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const Kernels& kernels(Level level) {
  if (!available(level)) {
    throw Error(ErrorCode::UnsupportedOp, std::string(level_name(level)) + " not available");
  }
  switch (level) {
#if defined(__x86_64__) || defined(_M_X64)
    case Level::Avx2: return kAvx2;
#endif
#if defined(__aarch64__)
    case Level::Neon: return kNeon;
#endif
    default: return kScalar;
  }
}

const Kernels& kernels() { return kernels(active_level()); }

Level active_level() { return static_cast<Level>(current().load(std::memory_order_relaxed)); }

void set_level(Level level) {
  if (!available(level)) {
    throw Error(ErrorCode::UnsupportedOp, std::string(level_name(level)) + " not available");
  }
  current().store(static_cast<int>(level), std::memory_order_relaxed);
}

std::string_view level_name(Level level) {
  switch (level) {
    case Level::Scalar: return "scalar";
    case Level::Avx2: return "avx2";
    case Level::Neon: return "neon";
  }
  return "unknown";
}

}  // namespace ecvis::simd
