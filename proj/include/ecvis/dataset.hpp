#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecvis/synth.hpp"

namespace ecvis::synth {

nlohmann::json to_json(const ClipSpec& spec);
ClipSpec clip_spec_from_json(const nlohmann::json& j);

nlohmann::json boxes_to_json(const BoxSet& boxes);
BoxSet boxes_from_json(const nlohmann::json& j, std::size_t height, std::size_t width);

/// Writes frames.ecvt (f32), boxes.json, gt_masks.ecvt (u8) and clip.json.
void write_clip(const VideoClip& clip, const ClipSpec& spec, const std::filesystem::path& dir);

/// Generates every spec into DIR/clip_XXX/ and writes DIR/manifest.json.
void write_dataset(const std::vector<ClipSpec>& specs, const std::filesystem::path& dir);

/// What a training path may see of a clip.
struct ClipInputs {
  std::string id;
  Tensor frames;
  BoxSet boxes;
};

/// Read-only view of a dataset directory (or a single clip directory). Frames
/// and boxes load freely; every ground-truth mask read is counted so callers
/// can prove a code path never touched them.
class Dataset {
 public:
  static Dataset open(const std::filesystem::path& dir);

  std::size_t size() const noexcept { return clips_.size(); }
  const std::string& id(std::size_t i) const { return clips_.at(i).id; }
  ClipInputs inputs(std::size_t i) const;
  Tensor gt_masks(std::size_t i) const;
  std::size_t gt_reads() const noexcept { return gt_reads_->load(); }

 private:
  struct Entry {
    std::string id;
    std::filesystem::path dir;
    std::string frames, boxes, gt_masks;
  };
  std::vector<Entry> clips_;
  std::shared_ptr<std::atomic<std::size_t>> gt_reads_ = std::make_shared<std::atomic<std::size_t>>(0);
};

}  // namespace ecvis::synth
