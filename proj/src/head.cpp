#include "ecvis/head.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ecvis/error.hpp"
#include "ecvis/matching.hpp"

namespace ecvis {

namespace {
constexpr double kStdFloor = 1e-3;
}  // namespace

PixelFeatures pixel_features(const Tensor& frames, std::size_t out_h, std::size_t out_w) {
  if (frames.rank() != 4 || frames.dim(1) != 3) {
    throw Error(ErrorCode::ShapeMismatch, "frames must be T x 3 x H x W");
  }
  if (out_h == 0 || out_w == 0) throw Error(ErrorCode::BadGrid, "empty feature grid");
  const std::size_t t_frames = frames.dim(0);
  const std::size_t plane = out_h * out_w;
  const std::size_t count = t_frames * plane;
  PixelFeatures f{t_frames, out_h, out_w, TensorD({kFeatureDim, count})};
  const double sy = static_cast<double>(frames.dim(2)) / static_cast<double>(out_h);
  const double sx = static_cast<double>(frames.dim(3)) / static_cast<double>(out_w);
  const double pi = std::numbers::pi;
  // Per-clip RGB standardization; the head has no bias term.
  double mean[3], inv_std[3];
  const std::size_t hw = frames.dim(2) * frames.dim(3);
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t t = 0; t < t_frames; ++t) {
      const float* src = frames.data() + (t * 3 + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        s += src[i];
        s2 += static_cast<double>(src[i]) * src[i];
      }
    }
    const double n = static_cast<double>(t_frames * hw);
    mean[c] = s / n;
    inv_std[c] = 1.0 / std::sqrt(std::max(s2 / n - mean[c] * mean[c], 0.0) + kStdFloor * kStdFloor);
  }
  for (std::size_t t = 0; t < t_frames; ++t) {
    for (std::size_t y = 0; y < out_h; ++y) {
      for (std::size_t x = 0; x < out_w; ++x) {
        const std::size_t p = t * plane + y * out_w + x;
        const double py = (static_cast<double>(y) + 0.5) * sy - 0.5;
        const double px = (static_cast<double>(x) + 0.5) * sx - 0.5;
        for (std::size_t c = 0; c < 3; ++c) {
          f.phi[c * count + p] = (matching::sample_bilinear(frames, t, c, py, px) - mean[c]) * inv_std[c];
        }
        const double u = (static_cast<double>(x) + 0.5) / static_cast<double>(out_w);
        const double v = (static_cast<double>(y) + 0.5) / static_cast<double>(out_h);
        const double enc[10] = {u,
                                v,
                                std::sin(pi * u),
                                std::cos(pi * u),
                                std::sin(2 * pi * u),
                                std::cos(2 * pi * u),
                                std::sin(pi * v),
                                std::cos(pi * v),
                                std::sin(2 * pi * v),
                                std::cos(2 * pi * v)};
        for (std::size_t k = 0; k < 10; ++k) f.phi[(3 + k) * count + p] = enc[k];
      }
    }
  }
  return f;
}

ToyMaskHead::ToyMaskHead(TensorD weights) : weights_(std::move(weights)) {
  if (weights_.rank() != 2 || weights_.dim(1) != kFeatureDim) {
    throw Error(ErrorCode::ShapeMismatch, "head weights must be C x " + std::to_string(kFeatureDim));
  }
}

ToyMaskHead ToyMaskHead::init(std::size_t channels, double sigma, Rng& rng) {
  TensorD w({channels, kFeatureDim});
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = sigma * rng.normal();
  return ToyMaskHead(std::move(w));
}

TensorD ToyMaskHead::logits(const PixelFeatures& f) const {
  return ad::ops::matmul(weights_, f.phi).reshaped({channels(), f.frames, f.height, f.width});
}

ad::Var head_logits(ad::Tape& tape, ad::Var weights, const PixelFeatures& f) {
  const std::size_t c = tape.value(weights).dim(0);
  return tape.reshape(tape.matmul(weights, tape.constant(f.phi)), {c, f.frames, f.height, f.width});
}

}  // namespace ecvis
