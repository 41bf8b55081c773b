#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "ecvis/rng.hpp"
#include "ecvis/tensor.hpp"

namespace ecvis::matching {

inline constexpr double kDiceEps = 1e-6;

struct Assignment {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (row, column), ascending rows
  double total_cost = 0.0;
};

/// Minimum-cost assignment of size min(R, C) for an R x C cost matrix.
Assignment hungarian(const TensorD& cost);

/// Sampled spatial locations, one sorted list per frame.
struct PointSample {
  std::vector<std::vector<std::size_t>> per_frame;
};

/// n_points distinct locations per frame drawn uniformly without replacement
/// (capped at the frame size); each list is sorted ascending.
PointSample sample_points(std::size_t frames, std::size_t locations, std::size_t n_points, Rng& rng);

/// 1 - soft Dice over the sampled values of two T x H x W tensors, pooled
/// across frames.
double dice_cost(const TensorD& pred, const TensorD& target, const PointSample& sample);
double sampled_dice_cost(const TensorD& pred, const TensorD& target, std::size_t n_points, Rng& rng);

/// Soft Dice loss 1 - 2 sum(pq) / (sum(p^2) + sum(q^2) + eps) on two vectors.
double dice_loss(const double* p, const double* q, std::size_t n);

/// Pairs every ground-truth instance with one predicted channel. `o` holds
/// channel logits C x T x H' x W'; `boxmasks` is T x I x H' x W'. The same
/// point sample is shared by every entry of the cost matrix. Pairs are
/// (instance, channel).
Assignment instance_sequence_match(const TensorD& o, const TensorD& boxmasks, std::size_t n_points,
                                   Rng& rng);

struct MatchParams {
  std::size_t window_radius = 5;
  std::size_t patch_half = 1;
  std::size_t top_k = 5;
  double reject_thresh = 0.05;
};

struct Match {
  std::size_t target = 0;  // flat grid index in frame t_hat
  float distance = 0.0f;
};

/// For every grid location of frame t, the matched locations in frame t_hat
/// sorted by ascending patch distance.
struct MatchMap {
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  std::vector<std::vector<Match>> lists;

  std::size_t total_matches() const;
};

/// RGB patches sampled bilinearly at grid-cell centres, one descriptor of
/// 3 (2h+1)^2 floats per grid location of one frame.
std::vector<float> patch_descriptors(const Tensor& frames, std::size_t t, std::size_t grid_h,
                                     std::size_t grid_w, std::size_t patch_half);

MatchMap temporal_knn_match(const Tensor& frames, std::size_t t, std::size_t t_hat,
                            const MatchParams& params, std::size_t grid_h, std::size_t grid_w);

/// Bilinear sample of channel `c` of frame `t` at pixel coordinates (y, x),
/// clamped to the frame.
float sample_bilinear(const Tensor& frames, std::size_t t, std::size_t c, double y, double x);

}  // namespace ecvis::matching
