#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "ecvis/losses.hpp"
#include "ecvis/matching.hpp"

namespace ecvis {

struct Config {
  std::size_t scale = 4;
  std::size_t eig_count = 3;
  double beta = 0.5;
  double alpha = 1.0;
  matching::MatchParams tk;
  losses::PairwiseParams pairwise;
  std::size_t n_points = 128;
  double lr = 1e-4;
  double momentum = 0.9;
  std::size_t steps = 300;
  std::uint64_t seed = 0;
  bool tel_on = true;
  bool qcc_on = true;
  bool tk_on = true;

  std::size_t channels = 3;     // predicted channels C of the toy head
  std::size_t grid_stride = 2;  // frame pixels per mask-grid cell along each axis
  double init_sigma = 0.05;     // std of the initial head weights
  std::size_t kmeans_restarts = 1;
  std::size_t two_stage_step = 0;  // > 0: alpha = beta = 0 before this step
  std::size_t threads = 1;

  /// alpha and beta in force at `step`, after toggles and staging.
  double effective_alpha(std::size_t step) const;
  double effective_beta(std::size_t step) const;
};

/// Throws BadConfig on out-of-range values.
void validate(const Config& c);

/// Missing keys keep their defaults; unknown keys are rejected.
Config config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Config& c);
Config load_config(const std::filesystem::path& path);

}  // namespace ecvis
