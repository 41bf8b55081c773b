#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ecvis/autodiff.hpp"
#include "ecvis/tensor.hpp"

namespace ecvis::spectral {

/// Eigenvalues closer than this to another eigenvalue have no usable gradient.
inline constexpr double kDegenerateGap = 1e-6;
inline constexpr int kMaxSweeps = 100;
inline constexpr double kOffDiagonalTolerance = 1e-10;

/// Downsampled, flattened instance channel of one frame.
struct InstanceFeatureVector {
  std::vector<double> values;
  std::size_t size() const noexcept { return values.size(); }
};

/// Dense symmetric n x n matrix, row-major.
struct SymmetricMatrix {
  std::size_t n = 0;
  std::vector<double> entries;

  double operator()(std::size_t i, std::size_t j) const { return entries[i * n + j]; }
  double& operator()(std::size_t i, std::size_t j) { return entries[i * n + j]; }
};

struct AffinityMatrix : SymmetricMatrix {};
struct LaplacianMatrix : SymmetricMatrix {};

/// The smallest `values.size()` eigenpairs, ascending.
struct EigenPack {
  std::vector<double> values;
  std::vector<std::vector<double>> vectors;
  std::vector<double> gaps;      // distance to the nearest other eigenvalue
  std::vector<double> spectrum;  // all n eigenvalues, ascending
  int sweeps = 0;
};

/// Full eigendecomposition by cyclic Jacobi on a double copy. Eigenvalues are
/// ascending; row k of `vectors` (n x n, row-major) is the k-th eigenvector.
struct JacobiResult {
  std::vector<double> values;
  std::vector<double> vectors;
  int sweeps = 0;
};
JacobiResult jacobi_eigen(std::span<const double> matrix, std::size_t n,
                          int max_sweeps = kMaxSweeps, double tolerance = kOffDiagonalTolerance);

/// Per-axis downsampling factor for a total reduction `scale` (must be a
/// perfect square).
std::size_t axis_factor(std::size_t scale);

InstanceFeatureVector prepare_instance_features(const TensorD& channel, std::size_t scale);
InstanceFeatureVector prepare_instance_features(const Tensor& channel, std::size_t scale);

/// A(i,j) = e_i e_j where that product is strictly positive, else 0.
AffinityMatrix affinity(const InstanceFeatureVector& e);
LaplacianMatrix laplacian(const AffinityMatrix& a);
EigenPack smallest_eigenvalues(const LaplacianMatrix& la, std::size_t count);

/// Gradient of eigenvalue `index` with respect to the Laplacian entries,
/// v v^T. Throws DegenerateEigenvalue when the eigenvalue is not simple.
TensorD eigenvalue_grad(const LaplacianMatrix& la, const EigenPack& pack, std::size_t index);

/// Pulls a gradient on Laplacian entries back to the feature vector through
/// L = diag(A 1) - A and A = (e e^T) masked by the constant sign pattern.
std::vector<double> chain_to_features(const TensorD& grad_la, const InstanceFeatureVector& e);

/// Convenience: the `count` smallest Laplacian eigenvalues of a feature vector.
EigenPack feature_spectrum(const InstanceFeatureVector& e, std::size_t count);

/// Tape node mapping a feature vector (any shape, flattened) to its `count`
/// smallest Laplacian eigenvalues. The smallest eigenvalue is identically
/// zero and contributes no gradient; degenerate eigenvalues contribute none.
ad::Var laplacian_eigenvalues(ad::Tape& tape, ad::Var features, std::size_t count);

}  // namespace ecvis::spectral
