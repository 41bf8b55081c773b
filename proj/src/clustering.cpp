#include "ecvis/clustering.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "ecvis/spectral.hpp"

namespace ecvis::clustering {
namespace {

double sq_dist(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return s;
}

std::vector<double> seed_plus_plus(const PointSet& pts, std::size_t k, Rng& rng) {
  const std::size_t m = pts.size();
  const std::size_t dim = pts.dim;
  std::vector<double> centroids;
  centroids.reserve(k * dim);
  auto take = [&](std::size_t i) { centroids.insert(centroids.end(), pts.row(i), pts.row(i) + dim); };
  take(rng.below(m));
  std::vector<double> d2(m);
  for (std::size_t i = 0; i < m; ++i) d2[i] = sq_dist(pts.row(i), centroids.data(), dim);
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double cum = 0.0;
      pick = m - 1;
      for (std::size_t i = 0; i < m; ++i) {
        cum += d2[i];
        if (r < cum && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.below(m);
    }
    take(pick);
    const double* newest = centroids.data() + c * dim;
    for (std::size_t i = 0; i < m; ++i) d2[i] = std::min(d2[i], sq_dist(pts.row(i), newest, dim));
  }
  return centroids;
}

// Returns true when any assignment changed.
bool assign(const PointSet& pts, std::size_t k, const std::vector<double>& centroids,
            std::vector<std::size_t>& assignments) {
  bool changed = false;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      const double d = sq_dist(pts.row(i), centroids.data() + c * pts.dim, pts.dim);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    if (assignments[i] != best) {
      assignments[i] = best;
      changed = true;
    }
  }
  return changed;
}

void update_centroids(const PointSet& pts, std::size_t k, std::vector<std::size_t>& assignments,
                      std::vector<double>& centroids) {
  const std::size_t dim = pts.dim;
  std::vector<std::size_t> counts(k, 0);
  std::fill(centroids.begin(), centroids.end(), 0.0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    ++counts[assignments[i]];
    double* c = centroids.data() + assignments[i] * dim;
    for (std::size_t d = 0; d < dim; ++d) c[d] += pts.row(i)[d];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) continue;
    for (std::size_t d = 0; d < dim; ++d) centroids[c * dim + d] /= static_cast<double>(counts[c]);
  }
  // Empty clusters steal the point farthest from its own centroid.
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] != 0) continue;
    std::size_t far = pts.size();
    double far_d = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (counts[assignments[i]] < 2) continue;
      const double d = sq_dist(pts.row(i), centroids.data() + assignments[i] * dim, dim);
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    if (far == pts.size()) continue;
    const std::size_t donor = assignments[far];
    --counts[donor];
    counts[c] = 1;
    assignments[far] = c;
    std::copy_n(pts.row(far), dim, centroids.data() + c * dim);
    std::fill_n(centroids.data() + donor * dim, dim, 0.0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (assignments[i] != donor) continue;
      for (std::size_t d = 0; d < dim; ++d) centroids[donor * dim + d] += pts.row(i)[d];
    }
    for (std::size_t d = 0; d < dim; ++d) {
      centroids[donor * dim + d] /= static_cast<double>(counts[donor]);
    }
  }
}

ClusterResult lloyd(const PointSet& pts, std::size_t k, Rng& rng) {
  ClusterResult r;
  r.k = k;
  r.centroids = seed_plus_plus(pts, k, rng);
  r.assignments.assign(pts.size(), k);
  bool fixed_point = false;
  for (int it = 0; it < kMaxLloydIterations; ++it) {
    const bool changed = assign(pts, k, r.centroids, r.assignments);
    if (!changed && it > 0) {
      fixed_point = true;
      break;
    }
    update_centroids(pts, k, r.assignments, r.centroids);
    const double now = inertia(pts, r.assignments, r.centroids);
    if (!r.inertia_history.empty() && now > r.inertia_history.back() * (1.0 + 1e-12) + 1e-12) {
      throw std::logic_error("k-means inertia increased during a Lloyd iteration");
    }
    r.inertia_history.push_back(now);
    r.iterations = it + 1;
  }
  if (!fixed_point) assign(pts, k, r.centroids, r.assignments);
  r.inertia = inertia(pts, r.assignments, r.centroids);
  return r;
}

}  // namespace

double inertia(const PointSet& points, std::span<const std::size_t> assignments,
               std::span<const double> centroids) {
  double s = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    s += sq_dist(points.row(i), centroids.data() + assignments[i] * points.dim, points.dim);
  }
  return s;
}

ClusterResult kmeans(const PointSet& points, std::size_t k, Rng& rng, std::size_t restarts) {
  if (k < 1 || points.size() < k) {
    throw Error(ErrorCode::TooFewPoints, std::to_string(points.size()) + " points for k=" +
                                             std::to_string(k));
  }
  ClusterResult best;
  for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
    ClusterResult run = lloyd(points, k, rng);
    if (r == 0 || run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

double davies_bouldin(const PointSet& points, const ClusterResult& result) {
  const std::size_t k = result.k;
  const std::size_t dim = points.dim;
  if (k < 2) throw Error(ErrorCode::SingleCluster, "Davies-Bouldin needs at least 2 clusters");
  std::vector<double> scatter(k, 0.0);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::size_t c = result.assignments[i];
    scatter[c] += std::sqrt(sq_dist(points.row(i), result.centroid(c, dim), dim));
    ++counts[c];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) throw Error(ErrorCode::SingleCluster, "cluster " + std::to_string(c) + " is empty");
    scatter[c] /= static_cast<double>(counts[c]);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    double worst = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (j == i) continue;
      const double dist = std::sqrt(sq_dist(result.centroid(i, dim), result.centroid(j, dim), dim));
      if (dist == 0.0) {
        throw Error(ErrorCode::CoincidentCentroids,
                    "centroids " + std::to_string(i) + " and " + std::to_string(j) + " coincide");
      }
      worst = std::max(worst, (scatter[i] + scatter[j]) / dist);
    }
    total += worst;
  }
  return total / static_cast<double>(k);
}

PointSet qcc_points(const TensorD& o, std::size_t scale) {
  if (o.rank() != 4) throw Error(ErrorCode::ShapeMismatch, "O must be C x T x H' x W'");
  const TensorD small = area_downsample(o, spectral::axis_factor(scale));
  const std::size_t channels = small.dim(0);
  const std::size_t per_channel = small.size() / channels;
  PointSet pts;
  pts.dim = channels;
  pts.data.resize(small.size());
  for (std::size_t loc = 0; loc < per_channel; ++loc) {
    for (std::size_t c = 0; c < channels; ++c) pts.data[loc * channels + c] = small[c * per_channel + loc];
  }
  return pts;
}

QccReport qcc(std::span<const TensorD> o_per_batch, std::span<const std::size_t> instance_counts,
              std::size_t scale, const Rng& rng, std::size_t restarts) {
  if (o_per_batch.size() != instance_counts.size() || o_per_batch.empty()) {
    throw Error(ErrorCode::ShapeMismatch, "qcc needs one instance count per batch item");
  }
  QccReport report;
  double sum = 0.0;
  for (std::size_t b = 0; b < o_per_batch.size(); ++b) {
    double db = 0.0;
    if (instance_counts[b] >= 2) {
      const PointSet pts = qcc_points(o_per_batch[b], scale);
      Rng local = rng.split(b);
      db = davies_bouldin(pts, kmeans(pts, instance_counts[b], local, restarts));
    }
    report.per_batch_db.push_back(db);
    sum += db;
  }
  report.q = 1.0 + sum / static_cast<double>(o_per_batch.size());
  return report;
}

}  // namespace ecvis::clustering
