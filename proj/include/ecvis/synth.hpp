#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ecvis/tensor.hpp"

namespace ecvis::synth {

enum class ShapeKind { Rectangle, Ellipse };

struct ClipSpec {
  std::size_t t_frames = 4;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t n_instances = 2;
  std::vector<ShapeKind> shape_kinds{ShapeKind::Rectangle, ShapeKind::Ellipse};
  std::array<double, 2> speed_range{0.5, 2.0};  // pixels per frame
  double occlusion_level = 0.0;                 // [0, 1]
  double brightness_jitter = 0.0;               // [0, 0.3]
  double noise_sigma = 0.0;
  std::array<std::size_t, 2> half_size_range{3, 7};  // shape half extent in pixels
  std::uint64_t seed = 0;
};

/// Half-open pixel box; empty when x1 <= x0 or y1 <= y0.
struct Box {
  float x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  bool empty() const noexcept { return !(x1 > x0 && y1 > y0); }
  friend bool operator==(const Box&, const Box&) = default;
};

/// Per-frame per-instance boxes of a clip with its frame size.
struct BoxSet {
  std::size_t frames = 0;
  std::size_t instances = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Box> boxes;  // frames x instances

  const Box& at(std::size_t t, std::size_t i) const { return boxes[t * instances + i]; }
  Box& at(std::size_t t, std::size_t i) { return boxes[t * instances + i]; }
};

struct VideoClip {
  Tensor frames;    // T x 3 x H x W, values in [0, 1]
  BoxSet boxes;     // tight boxes of the visible masks
  Tensor gt_masks;  // T x I x H x W binary; evaluation only
  std::vector<std::vector<std::size_t>> depth_order;  // per frame, back to front
};

void validate(const ClipSpec& spec);

VideoClip generate_clip(const ClipSpec& spec);

/// Box coverage on an H' x W' grid: each cell holds the fraction of its area
/// inside the box. Result is T x I x H' x W'.
TensorD boxes_to_boxmasks(const BoxSet& boxes, std::size_t grid_h, std::size_t grid_w);

/// Tight half-open bounding box of the nonzero pixels of one H x W plane.
Box tight_box(const float* mask, std::size_t height, std::size_t width);

/// FNV-1a over the little-endian bytes of the frame values.
std::uint64_t checksum(const Tensor& t);

}  // namespace ecvis::synth
