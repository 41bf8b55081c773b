#include "ecvis/synth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "ecvis/rng.hpp"

namespace ecvis::synth {
namespace {

struct Instance {
  ShapeKind kind = ShapeKind::Rectangle;
  long half_h = 3, half_w = 3;
  double color[3] = {0, 0, 0};
  double anchor_y = 0, anchor_x = 0;  // centre at the clip midpoint
  double vel_y = 0, vel_x = 0;
  double lo_y = 0, hi_y = 0, lo_x = 0, hi_x = 0;  // allowed centre range
  std::uint64_t texture_seed = 0;
};

// Reflect x into [lo, hi] (triangle wave), the path of a point bouncing
// between two walls.
double bounce(double x, double lo, double hi) {
  const double span = hi - lo;
  if (span <= 0.0) return lo;
  double r = std::fmod(x - lo, 2.0 * span);
  if (r < 0) r += 2.0 * span;
  return r <= span ? lo + r : lo + 2.0 * span - r;
}

bool inside(const Instance& inst, long dy, long dx) {
  if (inst.kind == ShapeKind::Rectangle) {
    return std::labs(dy) <= inst.half_h && std::labs(dx) <= inst.half_w;
  }
  const double ny = static_cast<double>(dy) / (static_cast<double>(inst.half_h) + 0.5);
  const double nx = static_cast<double>(dx) / (static_cast<double>(inst.half_w) + 0.5);
  return ny * ny + nx * nx <= 1.0;
}

// Speckle in object-local coordinates so the texture moves with the shape.
double speckle(std::uint64_t seed, long dy, long dx) {
  Rng r(seed ^ (static_cast<std::uint64_t>(dy + 1024) * 0x9E3779B1ull) ^
        (static_cast<std::uint64_t>(dx + 1024) << 32));
  return r.uniform() - 0.5;
}

}  // namespace

void validate(const ClipSpec& s) {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::BadSpec, m); };
  if (s.t_frames < 1) bad("t_frames must be >= 1");
  if (s.n_instances < 1) bad("n_instances must be >= 1");
  if (s.height == 0 || s.width == 0 || s.height % 4 != 0 || s.width % 4 != 0) {
    bad("height and width must be positive multiples of 4");
  }
  if (s.shape_kinds.empty()) bad("shape_kinds must not be empty");
  if (s.speed_range[0] < 0 || s.speed_range[1] < s.speed_range[0]) bad("bad speed_range");
  if (!(s.occlusion_level >= 0.0 && s.occlusion_level <= 1.0)) bad("occlusion_level outside [0, 1]");
  if (!(s.brightness_jitter >= 0.0 && s.brightness_jitter <= 0.3)) bad("brightness_jitter outside [0, 0.3]");
  if (!(s.noise_sigma >= 0.0)) bad("noise_sigma must be >= 0");
  if (s.half_size_range[0] < 1 || s.half_size_range[1] < s.half_size_range[0]) bad("bad half_size_range");
  const std::size_t lane = s.width / s.n_instances;
  if (2 * s.half_size_range[0] + 1 > lane || 2 * s.half_size_range[0] + 1 > s.height) {
    bad("shapes do not fit: lane width " + std::to_string(lane) + " px");
  }
}

VideoClip generate_clip(const ClipSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  const std::size_t T = spec.t_frames, H = spec.height, W = spec.width, I = spec.n_instances;
  const double lane = static_cast<double>(W) / static_cast<double>(I);
  const double level = spec.occlusion_level;
  const double mid = 0.5 * static_cast<double>(T - 1);
  const double way_y = 0.5 * static_cast<double>(H - 1);
  const double way_x = 0.5 * static_cast<double>(W - 1);

  std::vector<Instance> insts(I);
  for (std::size_t i = 0; i < I; ++i) {
    Instance& in = insts[i];
    in.kind = spec.shape_kinds[rng.below(spec.shape_kinds.size())];
    const std::size_t max_half_w = std::min(spec.half_size_range[1],
                                            (static_cast<std::size_t>(lane) - 1) / 2);
    const std::size_t max_half_h = std::min(spec.half_size_range[1], (H - 1) / 2);
    in.half_w = static_cast<long>(spec.half_size_range[0] +
                                  rng.below(max_half_w - spec.half_size_range[0] + 1));
    in.half_h = static_cast<long>(spec.half_size_range[0] +
                                  rng.below(max_half_h - spec.half_size_range[0] + 1));
    for (double& c : in.color) c = rng.uniform(0.25, 0.95);
    in.texture_seed = rng.next_u64();

    // Lane i at occlusion 0, widening to the whole frame at occlusion 1.
    const double lane_lo = lane * static_cast<double>(i);
    const double lane_hi = lane * static_cast<double>(i + 1) - 1.0;
    const double reg_lo = (1.0 - level) * lane_lo;
    const double reg_hi = (1.0 - level) * lane_hi + level * static_cast<double>(W - 1);
    in.lo_x = std::ceil(reg_lo + static_cast<double>(in.half_w));
    in.hi_x = std::floor(reg_hi - static_cast<double>(in.half_w));
    in.lo_y = static_cast<double>(in.half_h);
    in.hi_y = static_cast<double>(H - 1) - static_cast<double>(in.half_h);
    const double ax = rng.uniform(in.lo_x, in.hi_x);
    const double ay = rng.uniform(in.lo_y, in.hi_y);
    in.anchor_x = (1.0 - level) * ax + level * std::clamp(way_x, in.lo_x, in.hi_x);
    in.anchor_y = (1.0 - level) * ay + level * std::clamp(way_y, in.lo_y, in.hi_y);
    const double speed = rng.uniform(spec.speed_range[0], spec.speed_range[1]);
    const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    in.vel_y = speed * std::sin(angle);
    in.vel_x = speed * std::cos(angle);
  }

  // Static background with a faint speckle.
  const std::uint64_t bg_seed = rng.next_u64();
  std::vector<double> background(3 * H * W);
  const double bg_base[3] = {rng.uniform(0.05, 0.2), rng.uniform(0.05, 0.2), rng.uniform(0.05, 0.2)};
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        background[(c * H + y) * W + x] =
            bg_base[c] + 0.05 * speckle(bg_seed + c, static_cast<long>(y), static_cast<long>(x));
      }
    }
  }

  VideoClip clip;
  clip.frames = Tensor({T, 3, H, W});
  clip.gt_masks = Tensor({T, I, H, W});
  clip.boxes = BoxSet{T, I, H, W, std::vector<Box>(T * I)};
  Rng noise = rng.split(0xC0FFEE);
  std::vector<long> owner(H * W);
  for (std::size_t t = 0; t < T; ++t) {
    const double brightness = 1.0 + spec.brightness_jitter * (2.0 * rng.uniform() - 1.0);
    std::fill(owner.begin(), owner.end(), -1);
    std::vector<long> cy(I), cx(I);
    for (std::size_t i = 0; i < I; ++i) {
      const Instance& in = insts[i];
      const double dt = static_cast<double>(t) - mid;
      cy[i] = std::lround(bounce(in.anchor_y + in.vel_y * dt, in.lo_y, in.hi_y));
      cx[i] = std::lround(bounce(in.anchor_x + in.vel_x * dt, in.lo_x, in.hi_x));
      for (long y = cy[i] - in.half_h; y <= cy[i] + in.half_h; ++y) {
        for (long x = cx[i] - in.half_w; x <= cx[i] + in.half_w; ++x) {
          if (y < 0 || x < 0 || y >= static_cast<long>(H) || x >= static_cast<long>(W)) continue;
          if (inside(in, y - cy[i], x - cx[i])) owner[y * W + x] = static_cast<long>(i);
        }
      }
    }
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        const long o = owner[y * W + x];
        for (std::size_t c = 0; c < 3; ++c) {
          double v = background[(c * H + y) * W + x];
          if (o >= 0) {
            const Instance& in = insts[static_cast<std::size_t>(o)];
            v = in.color[c] + 0.12 * speckle(in.texture_seed + c, static_cast<long>(y) - cy[o],
                                              static_cast<long>(x) - cx[o]);
          }
          v *= brightness;
          if (spec.noise_sigma > 0.0) v += spec.noise_sigma * noise.normal();
          clip.frames.at(t, c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
        if (o >= 0) clip.gt_masks.at(t, static_cast<std::size_t>(o), y, x) = 1.0f;
      }
    }
    std::vector<std::size_t> order(I);
    for (std::size_t i = 0; i < I; ++i) {
      order[i] = i;
      clip.boxes.at(t, i) = tight_box(clip.gt_masks.data() + (t * I + i) * H * W, H, W);
    }
    clip.depth_order.push_back(std::move(order));
  }
  return clip;
}

Box tight_box(const float* mask, std::size_t height, std::size_t width) {
  std::size_t y0 = height, y1 = 0, x0 = width, x1 = 0;
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      if (mask[y * width + x] == 0.0f) continue;
      y0 = std::min(y0, y);
      y1 = std::max(y1, y + 1);
      x0 = std::min(x0, x);
      x1 = std::max(x1, x + 1);
    }
  }
  if (y1 == 0) return Box{};
  return Box{static_cast<float>(x0), static_cast<float>(y0), static_cast<float>(x1),
             static_cast<float>(y1)};
}

TensorD boxes_to_boxmasks(const BoxSet& b, std::size_t grid_h, std::size_t grid_w) {
  if (grid_h == 0 || grid_w == 0) throw Error(ErrorCode::BadGrid, "empty grid");
  const double sy = static_cast<double>(b.height) / static_cast<double>(grid_h);
  const double sx = static_cast<double>(b.width) / static_cast<double>(grid_w);
  TensorD out({b.frames, b.instances, grid_h, grid_w});
  for (std::size_t t = 0; t < b.frames; ++t) {
    for (std::size_t i = 0; i < b.instances; ++i) {
      const Box& box = b.at(t, i);
      if (box.x0 < 0 || box.y0 < 0 || box.x1 > static_cast<float>(b.width) ||
          box.y1 > static_cast<float>(b.height)) {
        throw Error(ErrorCode::BoxOutOfRange, "box of instance " + std::to_string(i) +
                                                  " in frame " + std::to_string(t) +
                                                  " leaves the frame");
      }
      if (box.empty()) continue;
      for (std::size_t gy = 0; gy < grid_h; ++gy) {
        const double cy0 = static_cast<double>(gy) * sy;
        const double oy = std::max(0.0, std::min<double>(cy0 + sy, box.y1) - std::max<double>(cy0, box.y0));
        if (oy <= 0.0) continue;
        for (std::size_t gx = 0; gx < grid_w; ++gx) {
          const double cx0 = static_cast<double>(gx) * sx;
          const double ox = std::max(0.0, std::min<double>(cx0 + sx, box.x1) - std::max<double>(cx0, box.x0));
          out.at(t, i, gy, gx) = (oy * ox) / (sy * sx);
        }
      }
    }
  }
  return out;
}

std::uint64_t checksum(const Tensor& t) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (float v : t.values()) {
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
    for (int k = 0; k < 4; ++k) {
      h ^= (bits >> (8 * k)) & 0xFF;
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

}  // namespace ecvis::synth
