#pragma once

#include <cstddef>

#include "ecvis/autodiff.hpp"
#include "ecvis/rng.hpp"
#include "ecvis/tensor.hpp"

namespace ecvis {

/// Per-pixel features: RGB, normalized (x, y), and sin/cos(2^k pi u) for
/// k in {0, 1} over both coordinates.
inline constexpr std::size_t kFeatureDim = 13;

/// Fixed feature map of a clip sampled at the centres of an out_h x out_w
/// grid. `phi` is kFeatureDim x (T * out_h * out_w).
struct PixelFeatures {
  std::size_t frames = 0, height = 0, width = 0;
  TensorD phi;
};

PixelFeatures pixel_features(const Tensor& frames, std::size_t out_h, std::size_t out_w);

/// Linear per-pixel mask head without bias: logit(c) = w_c . phi.
class ToyMaskHead {
 public:
  ToyMaskHead() = default;
  explicit ToyMaskHead(TensorD weights);
  static ToyMaskHead init(std::size_t channels, double sigma, Rng& rng);

  std::size_t channels() const { return weights_.dim(0); }
  const TensorD& weights() const noexcept { return weights_; }
  TensorD& weights() noexcept { return weights_; }

  /// Logits C x T x H x W on the grid of `features`.
  TensorD logits(const PixelFeatures& features) const;

 private:
  TensorD weights_;  // C x kFeatureDim
};

/// Tape form of ToyMaskHead::logits with `weights` as a node.
ad::Var head_logits(ad::Tape& tape, ad::Var weights, const PixelFeatures& features);

}  // namespace ecvis
