#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecvis/config.hpp"
#include "ecvis/dataset.hpp"
#include "ecvis/head.hpp"
#include "ecvis/losses.hpp"
#include "ecvis/pipeline.hpp"

namespace ecvis {

/// Mean over instances and frames of |pred & gt| / |pred | gt| for binary
/// T x I x H x W masks; pairs with an empty union are skipped (1.0 when all
/// are).
double miou(const Tensor& pred, const Tensor& gt);

/// Mean TEL term over the cyclic frame pairs of a matched stack E
/// (N x T x H' x W').
double eigen_flicker(const TensorD& matched, const Config& config);

/// Optimised heads plus the per-step batch-mean loss reports.
struct TrainResult {
  Config config;
  std::vector<std::string> clip_ids;
  std::vector<ToyMaskHead> initial_heads;
  std::vector<ToyMaskHead> heads;
  std::vector<losses::LossReport> history;
  std::size_t gt_reads_during_training = 0;
};

/// Momentum SGD on one ToyMaskHead per clip. Never reads ground truth; throws
/// SupervisionLeak if the dataset's tracker moves and DivergenceDetected on a
/// non-finite loss or gradient.
TrainResult train(const Config& config, const synth::Dataset& data, bool keep_history = true);

struct ClipMetrics {
  std::string id;
  double miou = 0.0;
  double eigen_flicker = 0.0;
};

struct Metrics {
  double miou = 0.0;
  double eigen_flicker = 0.0;
  std::vector<ClipMetrics> per_clip;
};

/// Scores one head per clip against the hidden masks.
Metrics evaluate(const Config& config, const std::vector<ToyMaskHead>& heads, const synth::Dataset& data);

nlohmann::json to_json(const TrainResult& result, const Metrics& initial, const Metrics& final_metrics);

struct AblationSetting {
  std::string name;
  bool tel_on = false;
  bool qcc_on = false;
  std::size_t eig_count = 3;
};

struct AblationRow {
  AblationSetting setting;
  std::vector<double> miou, flicker;  // one per seed
  double miou_mean = 0.0, miou_std = 0.0;
  double flicker_mean = 0.0, flicker_std = 0.0;
};

struct AblationTable {
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRow> rows;
};

/// {TK}, {TK,QCC}, {TK,TEL}, {TK,TEL,QCC}; with `y_sweep` also the full
/// setting at eig_count 2 and 4.
std::vector<AblationSetting> default_ablation_settings(bool y_sweep);
AblationSetting parse_ablation_setting(const std::string& name);

/// Trains every setting for every seed (at least three seeds).
AblationTable ablate(const Config& base, const synth::Dataset& data, std::span<const std::uint64_t> seeds,
                     const std::vector<AblationSetting>& settings);

std::string to_csv(const AblationTable& table);
/// Grouped bar chart of mean miou per row with std whiskers.
std::string to_svg(const AblationTable& table);

}  // namespace ecvis
