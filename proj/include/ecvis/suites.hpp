#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "ecvis/config.hpp"
#include "ecvis/matching.hpp"
#include "ecvis/pipeline.hpp"

namespace ecvis::suites {

struct SuiteResult {
  std::string name;
  bool pass = false;
  double worst = 0.0;      // largest relative error seen
  double tolerance = 0.0;
  std::size_t cases = 0;
  std::size_t coords = 0;  // coordinates checked in total
  double seconds = 0.0;
};

/// Analytic eigenvalue gradients (chained to the feature vector) against
/// central differences on random features with eigengap > 1e-3.
SuiteResult spectral_gradients(std::size_t cases = 100, std::uint64_t seed = 1);

/// Tape gradients of the TK, TEL, projection and pairwise terms.
SuiteResult loss_gradients(std::size_t cases = 10, std::uint64_t seed = 2);

/// A T=3, 16 x 16 grid, two-instance clip with random channel logits.
struct EndToEndCase {
  Config config;
  ClipData clip;
  TensorD o;  // C x T x 16 x 16
  matching::Assignment assignment;
  double q = 1.0;
};

/// Draws a case whose nonzero used eigenvalues are separated by more than
/// `min_gap`.
EndToEndCase make_end_to_end_case(std::uint64_t seed, double min_gap = 1e-3);

/// Gradient of l_seg with respect to the channel logits, q and the
/// assignment held fixed.
SuiteResult end_to_end_gradients(std::size_t cases = 10, std::uint64_t seed = 3);

}  // namespace ecvis::suites
