#include "ecvis/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "ecvis/autodiff.hpp"
#include "ecvis/simd.hpp"

namespace ecvis::matching {

Assignment hungarian(const TensorD& cost) {
  if (cost.rank() != 2 || cost.dim(0) == 0 || cost.dim(1) == 0) {
    throw Error(ErrorCode::ShapeMismatch, "cost must be a non-empty matrix");
  }
  const std::size_t rows = cost.dim(0), cols = cost.dim(1);
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : cost.values()) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteCost, "cost matrix has a non-finite entry");
    hi = std::max(hi, v);
  }
  const std::size_t n = std::max(rows, cols);
  const double pad = hi + 1.0;
  auto c = [&](std::size_t i, std::size_t j) {
    return (i < rows && j < cols) ? cost[i * cols + j] : pad;
  };

  // Shortest augmenting paths with row/column potentials; 1-based, column 0
  // is the virtual root.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match_col(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match_col[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match_col[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match_col[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match_col[j0] = match_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::size_t> row_to_col(n, n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[match_col[j] - 1] = j - 1;
  Assignment out;
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t j = row_to_col[i];
    if (j < cols) {
      out.pairs.emplace_back(i, j);
      out.total_cost += cost[i * cols + j];
    }
  }
  return out;
}

PointSample sample_points(std::size_t frames, std::size_t locations, std::size_t n_points, Rng& rng) {
  if (n_points == 0) throw Error(ErrorCode::ShapeMismatch, "n_points must be >= 1");
  const std::size_t take = std::min(n_points, locations);
  PointSample s;
  std::vector<std::size_t> perm(locations);
  for (std::size_t t = 0; t < frames; ++t) {
    std::iota(perm.begin(), perm.end(), 0);
    // partial Fisher-Yates
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t j = i + rng.below(locations - i);
      std::swap(perm[i], perm[j]);
    }
    std::vector<std::size_t> pick(perm.begin(), perm.begin() + take);
    std::sort(pick.begin(), pick.end());
    s.per_frame.push_back(std::move(pick));
  }
  return s;
}

double dice_loss(const double* p, const double* q, std::size_t n) {
  double pq = 0.0, pp = 0.0, qq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    pq += p[i] * q[i];
    pp += p[i] * p[i];
    qq += q[i] * q[i];
  }
  return 1.0 - 2.0 * pq / (pp + qq + kDiceEps);
}

double dice_cost(const TensorD& pred, const TensorD& target, const PointSample& sample) {
  if (pred.dims() != target.dims() || pred.rank() != 3) {
    throw Error(ErrorCode::ShapeMismatch, "dice_cost needs equal T x H x W tensors, got " +
                                              dims_to_string(pred.dims()) + " and " +
                                              dims_to_string(target.dims()));
  }
  const std::size_t frames = pred.dim(0);
  const std::size_t plane = pred.dim(1) * pred.dim(2);
  if (sample.per_frame.size() != frames) throw Error(ErrorCode::ShapeMismatch, "sample frame count");
  double pq = 0.0, pp = 0.0, qq = 0.0;
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t loc : sample.per_frame[t]) {
      const double p = pred[t * plane + loc];
      const double q = target[t * plane + loc];
      pq += p * q;
      pp += p * p;
      qq += q * q;
    }
  }
  return 1.0 - 2.0 * pq / (pp + qq + kDiceEps);
}

double sampled_dice_cost(const TensorD& pred, const TensorD& target, std::size_t n_points, Rng& rng) {
  if (pred.dims() != target.dims() || pred.rank() != 3) {
    throw Error(ErrorCode::ShapeMismatch, "sampled_dice_cost needs equal T x H x W tensors");
  }
  return dice_cost(pred, target, sample_points(pred.dim(0), pred.dim(1) * pred.dim(2), n_points, rng));
}

Assignment instance_sequence_match(const TensorD& o, const TensorD& boxmasks, std::size_t n_points,
                                   Rng& rng) {
  if (o.rank() != 4 || boxmasks.rank() != 4) {
    throw Error(ErrorCode::ShapeMismatch, "expected O as C x T x H' x W' and box masks as T x I x H' x W'");
  }
  const std::size_t channels = o.dim(0), frames = o.dim(1), h = o.dim(2), w = o.dim(3);
  const std::size_t instances = boxmasks.dim(1);
  if (boxmasks.dim(0) != frames || boxmasks.dim(2) != h || boxmasks.dim(3) != w) {
    throw Error(ErrorCode::ShapeMismatch, "box masks do not match O");
  }
  if (instances == 0) throw Error(ErrorCode::ShapeMismatch, "no instances to match");
  if (channels < instances) {
    throw Error(ErrorCode::TooFewChannels, std::to_string(channels) + " channels for " +
                                               std::to_string(instances) + " instances");
  }
  const std::size_t plane = h * w;
  const PointSample sample = sample_points(frames, plane, n_points, rng);
  std::vector<TensorD> probs;
  for (std::size_t c = 0; c < channels; ++c) probs.push_back(ad::ops::sigmoid(o.slice(c)));
  TensorD cost({instances, channels});
  for (std::size_t i = 0; i < instances; ++i) {
    TensorD target({frames, h, w});
    for (std::size_t t = 0; t < frames; ++t) {
      std::copy_n(boxmasks.data() + (t * instances + i) * plane, plane, target.data() + t * plane);
    }
    for (std::size_t c = 0; c < channels; ++c) cost[i * channels + c] = dice_cost(probs[c], target, sample);
  }
  return hungarian(cost);
}

std::size_t MatchMap::total_matches() const {
  std::size_t n = 0;
  for (const auto& l : lists) n += l.size();
  return n;
}

float sample_bilinear(const Tensor& frames, std::size_t t, std::size_t c, double y, double x) {
  const std::size_t h = frames.dim(2), w = frames.dim(3);
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  const std::size_t y0 = static_cast<std::size_t>(std::floor(y));
  const std::size_t x0 = static_cast<std::size_t>(std::floor(x));
  const std::size_t y1 = std::min(y0 + 1, h - 1);
  const std::size_t x1 = std::min(x0 + 1, w - 1);
  const double fy = y - static_cast<double>(y0);
  const double fx = x - static_cast<double>(x0);
  const float* plane = frames.data() + (t * 3 + c) * h * w;
  const double top = plane[y0 * w + x0] * (1.0 - fx) + plane[y0 * w + x1] * fx;
  const double bottom = plane[y1 * w + x0] * (1.0 - fx) + plane[y1 * w + x1] * fx;
  return static_cast<float>(top * (1.0 - fy) + bottom * fy);
}

namespace {

void check_grid(const Tensor& frames, std::size_t grid_h, std::size_t grid_w) {
  if (frames.rank() != 4 || frames.dim(1) != 3) {
    throw Error(ErrorCode::ShapeMismatch, "frames must be T x 3 x H x W");
  }
  if (grid_h == 0 || grid_w == 0 || frames.dim(2) % grid_h != 0 || frames.dim(3) % grid_w != 0) {
    throw Error(ErrorCode::BadGrid, "grid " + std::to_string(grid_h) + "x" + std::to_string(grid_w) +
                                        " does not divide frame " + dims_to_string(frames.dims()));
  }
}

}  // namespace

std::vector<float> patch_descriptors(const Tensor& frames, std::size_t t, std::size_t grid_h,
                                     std::size_t grid_w, std::size_t patch_half) {
  check_grid(frames, grid_h, grid_w);
  const double sy = static_cast<double>(frames.dim(2) / grid_h);
  const double sx = static_cast<double>(frames.dim(3) / grid_w);
  const std::size_t side = 2 * patch_half + 1;
  const std::size_t len = 3 * side * side;
  std::vector<float> desc(grid_h * grid_w * len);
  const auto half = static_cast<std::ptrdiff_t>(patch_half);
  for (std::size_t gy = 0; gy < grid_h; ++gy) {
    for (std::size_t gx = 0; gx < grid_w; ++gx) {
      float* out = desc.data() + (gy * grid_w + gx) * len;
      for (std::size_t c = 0; c < 3; ++c) {
        for (std::ptrdiff_t dy = -half; dy <= half; ++dy) {
          for (std::ptrdiff_t dx = -half; dx <= half; ++dx) {
            const double y = (static_cast<double>(gy) + static_cast<double>(dy) + 0.5) * sy - 0.5;
            const double x = (static_cast<double>(gx) + static_cast<double>(dx) + 0.5) * sx - 0.5;
            *out++ = sample_bilinear(frames, t, c, y, x);
          }
        }
      }
    }
  }
  return desc;
}

MatchMap temporal_knn_match(const Tensor& frames, std::size_t t, std::size_t t_hat,
                            const MatchParams& params, std::size_t grid_h, std::size_t grid_w) {
  check_grid(frames, grid_h, grid_w);
  if (t == t_hat || t >= frames.dim(0) || t_hat >= frames.dim(0)) {
    throw Error(ErrorCode::BadGrid, "frame pair (" + std::to_string(t) + ", " +
                                        std::to_string(t_hat) + ") is invalid");
  }
  const std::size_t side = 2 * params.patch_half + 1;
  const std::size_t len = 3 * side * side;
  const std::vector<float> src = patch_descriptors(frames, t, grid_h, grid_w, params.patch_half);
  const std::vector<float> dst = patch_descriptors(frames, t_hat, grid_h, grid_w, params.patch_half);
  const auto& kern = simd::kernels();
  const float inv_len = 1.0f / static_cast<float>(len);
  const auto radius = static_cast<std::ptrdiff_t>(params.window_radius);

  MatchMap map;
  map.grid_h = grid_h;
  map.grid_w = grid_w;
  map.lists.resize(grid_h * grid_w);
  std::vector<Match> candidates;
  for (std::size_t gy = 0; gy < grid_h; ++gy) {
    for (std::size_t gx = 0; gx < grid_w; ++gx) {
      candidates.clear();
      const float* a = src.data() + (gy * grid_w + gx) * len;
      const auto y_lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(gy) - radius);
      const auto y_hi = std::min<std::ptrdiff_t>(grid_h - 1, static_cast<std::ptrdiff_t>(gy) + radius);
      const auto x_lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(gx) - radius);
      const auto x_hi = std::min<std::ptrdiff_t>(grid_w - 1, static_cast<std::ptrdiff_t>(gx) + radius);
      for (auto y = y_lo; y <= y_hi; ++y) {
        for (auto x = x_lo; x <= x_hi; ++x) {
          const std::size_t target = static_cast<std::size_t>(y) * grid_w + static_cast<std::size_t>(x);
          const float d = kern.sum_sq_diff(a, dst.data() + target * len, len) * inv_len;
          if (d < params.reject_thresh) candidates.push_back({target, d});
        }
      }
      std::sort(candidates.begin(), candidates.end(), [](const Match& l, const Match& r) {
        return l.distance < r.distance || (l.distance == r.distance && l.target < r.target);
      });
      if (candidates.size() > params.top_k) candidates.resize(params.top_k);
      map.lists[gy * grid_w + gx] = candidates;
    }
  }
  return map;
}

}  // namespace ecvis::matching
