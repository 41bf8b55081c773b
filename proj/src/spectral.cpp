#include "ecvis/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "ecvis/simd.hpp"

namespace ecvis::spectral {

JacobiResult jacobi_eigen(std::span<const double> matrix, std::size_t n, int max_sweeps,
                          double tolerance) {
  if (matrix.size() != n * n || n == 0) {
    throw Error(ErrorCode::ShapeMismatch, "jacobi_eigen needs an n x n matrix");
  }
  const auto& kern = simd::kernels();
  std::vector<double> a(matrix.begin(), matrix.end());
  double frob = 0.0;
  for (double x : a) frob += x * x;
  if (!std::isfinite(frob)) throw Error(ErrorCode::NonFiniteValue, "jacobi_eigen input is not finite");
  // Relative to the matrix scale so large-magnitude inputs still converge.
  const double threshold = tolerance * std::max(1.0, std::sqrt(frob));
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j) s += a[i * n + j] * a[i * n + j];
      }
    }
    return std::sqrt(s);
  };

  int sweep = 0;
  for (;; ++sweep) {
    if (off_norm() < threshold) break;
    if (sweep >= max_sweeps) {
      throw Error(ErrorCode::NoConvergence,
                  "Jacobi did not converge in " + std::to_string(max_sweeps) + " sweeps");
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double app = a[p * n + p];
        const double aqq = a[q * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        double* rp = a.data() + p * n;
        double* rq = a.data() + q * n;
        kern.rotate(rp, rq, n, c, s);
        rp[p] = app - t * apq;
        rq[q] = aqq + t * apq;
        rp[q] = 0.0;
        rq[p] = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          a[k * n + p] = rp[k];
          a[k * n + q] = rq[k];
        }
        kern.rotate(v.data() + p * n, v.data() + q * n, n, c, s);
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a[x * n + x] < a[y * n + y]; });
  JacobiResult out;
  out.sweeps = sweep;
  out.values.resize(n);
  out.vectors.resize(n * n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a[order[k] * n + order[k]];
    std::copy_n(v.data() + order[k] * n, n, out.vectors.data() + k * n);
  }
  return out;
}

std::size_t axis_factor(std::size_t scale) {
  if (scale == 0) throw Error(ErrorCode::BadScale, "scale must be >= 1");
  std::size_t r = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(scale))));
  while (r * r > scale) --r;
  while ((r + 1) * (r + 1) <= scale) ++r;
  if (r * r != scale) {
    throw Error(ErrorCode::BadScale, "scale " + std::to_string(scale) + " is not a perfect square");
  }
  return r;
}

InstanceFeatureVector prepare_instance_features(const TensorD& channel, std::size_t scale) {
  if (channel.rank() != 2) throw Error(ErrorCode::ShapeMismatch, "channel must be H' x W'");
  const TensorD flat = flatten_spatial(area_downsample(channel, axis_factor(scale)));
  return {flat.storage()};
}

InstanceFeatureVector prepare_instance_features(const Tensor& channel, std::size_t scale) {
  return prepare_instance_features(channel.cast<double>(), scale);
}

AffinityMatrix affinity(const InstanceFeatureVector& e) {
  AffinityMatrix a;
  a.n = e.size();
  a.entries.resize(a.n * a.n);
  simd::kernels().outer_positive(e.values.data(), a.n, a.entries.data());
  return a;
}

LaplacianMatrix laplacian(const AffinityMatrix& a) {
  LaplacianMatrix la;
  la.n = a.n;
  la.entries.resize(a.n * a.n);
  for (std::size_t i = 0; i < a.n; ++i) {
    double degree = 0.0;
    for (std::size_t j = 0; j < a.n; ++j) degree += a(i, j);
    for (std::size_t j = 0; j < a.n; ++j) la(i, j) = -a(i, j);
    la(i, i) += degree;
  }
  return la;
}

namespace {

// Connected components of the graph with an edge wherever L(i,j) != 0,
// each listed in ascending vertex order, ordered by smallest vertex.
std::vector<std::vector<std::size_t>> components(const LaplacianMatrix& la) {
  const std::size_t n = la.n;
  std::vector<std::size_t> label(n, n);
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> stack;
  for (std::size_t root = 0; root < n; ++root) {
    if (label[root] != n) continue;
    const std::size_t id = out.size();
    out.emplace_back();
    label[root] = id;
    stack.push_back(root);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      out[id].push_back(i);
      for (std::size_t j = 0; j < n; ++j) {
        if (label[j] == n && j != i && la(i, j) != 0.0) {
          label[j] = id;
          stack.push_back(j);
        }
      }
    }
    std::sort(out[id].begin(), out[id].end());
  }
  return out;
}

}  // namespace

// The Laplacian is block diagonal over connected components, so each block is
// diagonalised on its own. A connected block with zero row sums has exactly
// one zero eigenvalue (its constant vector), which is stored as an exact 0.
EigenPack smallest_eigenvalues(const LaplacianMatrix& la, std::size_t count) {
  if (count < 1 || count > la.n) {
    throw Error(ErrorCode::ShapeMismatch, "eigenvalue count " + std::to_string(count) +
                                              " outside [1, " + std::to_string(la.n) + "]");
  }
  const std::size_t n = la.n;
  struct Pair {
    double value;
    std::vector<double> vector;
  };
  std::vector<Pair> pairs;
  pairs.reserve(n);
  EigenPack pack;
  for (const auto& comp : components(la)) {
    const std::size_t m = comp.size();
    std::vector<double> block(m * m);
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) block[a * m + b] = la(comp[a], comp[b]);
    }
    const JacobiResult r = jacobi_eigen(block, m);
    pack.sweeps = std::max(pack.sweeps, r.sweeps);
    bool zero_row_sums = true;
    for (std::size_t a = 0; a < m && zero_row_sums; ++a) {
      double sum = 0.0, abs_sum = 0.0;
      for (std::size_t b = 0; b < m; ++b) {
        sum += block[a * m + b];
        abs_sum += std::fabs(block[a * m + b]);
      }
      zero_row_sums = std::fabs(sum) <= 1e-12 * abs_sum;
    }
    for (std::size_t k = 0; k < m; ++k) {
      Pair p{k == 0 && zero_row_sums ? 0.0 : r.values[k], std::vector<double>(n, 0.0)};
      for (std::size_t a = 0; a < m; ++a) p.vector[comp[a]] = r.vectors[k * m + a];
      pairs.push_back(std::move(p));
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) { return x.value < y.value; });
  for (const Pair& p : pairs) pack.spectrum.push_back(p.value);
  for (std::size_t k = 0; k < count; ++k) {
    pack.values.push_back(pairs[k].value);
    pack.vectors.push_back(std::move(pairs[k].vector));
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != k) gap = std::min(gap, std::fabs(pack.spectrum[k] - pack.spectrum[j]));
    }
    pack.gaps.push_back(gap);
  }
  return pack;
}

TensorD eigenvalue_grad(const LaplacianMatrix& la, const EigenPack& pack, std::size_t index) {
  if (index >= pack.values.size()) throw Error(ErrorCode::ShapeMismatch, "eigen index out of range");
  if (!(pack.gaps[index] > kDegenerateGap)) {
    throw Error(ErrorCode::DegenerateEigenvalue,
                "eigenvalue " + std::to_string(index) + " has gap " + std::to_string(pack.gaps[index]));
  }
  const std::vector<double>& v = pack.vectors[index];
  TensorD g({la.n, la.n});
  for (std::size_t i = 0; i < la.n; ++i) {
    for (std::size_t j = 0; j < la.n; ++j) g[i * la.n + j] = v[i] * v[j];
  }
  return g;
}

std::vector<double> chain_to_features(const TensorD& grad_la, const InstanceFeatureVector& e) {
  const std::size_t n = e.size();
  if (grad_la.size() != n * n) throw Error(ErrorCode::ShapeMismatch, "gradient is not n x n");
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double gii = grad_la[i * n + i];
    for (std::size_t j = 0; j < n; ++j) {
      if (!(e.values[i] * e.values[j] > 0.0)) continue;
      // A(i,j) enters D(i,i) with +1 and L(i,j) with -1.
      const double w = gii - grad_la[i * n + j];
      out[i] += w * e.values[j];
      out[j] += w * e.values[i];
    }
  }
  return out;
}

EigenPack feature_spectrum(const InstanceFeatureVector& e, std::size_t count) {
  return smallest_eigenvalues(laplacian(affinity(e)), count);
}

ad::Var laplacian_eigenvalues(ad::Tape& tape, ad::Var features, std::size_t count) {
  InstanceFeatureVector e{tape.value(features).storage()};
  if (e.size() < 2) throw Error(ErrorCode::ShapeMismatch, "feature vector needs >= 2 entries");
  const LaplacianMatrix la = laplacian(affinity(e));
  EigenPack pack = smallest_eigenvalues(la, count);
  TensorD value({count}, pack.values);
  const Dims in_dims = tape.value(features).dims();
  auto backward = [e = std::move(e), la, pack = std::move(pack), in_dims](const TensorD& up) {
    TensorD grad(in_dims, 0.0);
    for (std::size_t k = 1; k < pack.values.size(); ++k) {
      if (up[k] == 0.0 || !(pack.gaps[k] > kDegenerateGap)) continue;
      const std::vector<double> gk = chain_to_features(eigenvalue_grad(la, pack, k), e);
      for (std::size_t i = 0; i < gk.size(); ++i) grad[i] += up[k] * gk[i];
    }
    return std::vector<TensorD>{std::move(grad)};
  };
  return tape.custom({features}, std::move(value), std::move(backward));
}

}  // namespace ecvis::spectral
