#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ecvis/rng.hpp"
#include "ecvis/tensor.hpp"

namespace ecvis::clustering {

inline constexpr int kMaxLloydIterations = 50;

/// m points of dimension `dim`, row-major.
struct PointSet {
  std::size_t dim = 0;
  std::vector<double> data;

  std::size_t size() const noexcept { return dim ? data.size() / dim : 0; }
  const double* row(std::size_t i) const { return data.data() + i * dim; }
};

struct ClusterResult {
  std::size_t k = 0;
  std::vector<std::size_t> assignments;
  std::vector<double> centroids;  // k x dim
  double inertia = 0.0;
  int iterations = 0;
  std::vector<double> inertia_history;  // after every centroid update

  const double* centroid(std::size_t c, std::size_t dim) const { return centroids.data() + c * dim; }
};

struct QccReport {
  std::vector<double> per_batch_db;
  double q = 1.0;
};

/// k-means++ seeding then Lloyd iterations until the assignment is a fixed
/// point or kMaxLloydIterations pass. With restarts > 1 the lowest-inertia
/// run wins (earliest on ties).
ClusterResult kmeans(const PointSet& points, std::size_t k, Rng& rng, std::size_t restarts = 1);

double inertia(const PointSet& points, std::span<const std::size_t> assignments,
               std::span<const double> centroids);

double davies_bouldin(const PointSet& points, const ClusterResult& result);

/// Spatio-temporal features of one clip: O is C x T x H' x W'; each of the
/// T * H'W'/S downsampled locations becomes a C-dimensional point.
PointSet qcc_points(const TensorD& o, std::size_t scale);

/// Q = 1 + mean over batch items of the Davies-Bouldin score of a K-means
/// clustering with K = that item's instance count (items with K < 2 score 0).
QccReport qcc(std::span<const TensorD> o_per_batch, std::span<const std::size_t> instance_counts,
              std::size_t scale, const Rng& rng, std::size_t restarts = 1);

}  // namespace ecvis::clustering
