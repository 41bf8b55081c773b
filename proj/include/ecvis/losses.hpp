#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "ecvis/autodiff.hpp"
#include "ecvis/matching.hpp"
#include "ecvis/spectral.hpp"
#include "ecvis/tensor.hpp"

namespace ecvis::losses {

/// Lower bound applied to every agreement term before the log.
inline constexpr double kTauFloor = 1e-6;

struct LossReport {
  double l_proj = 0.0;
  double l_pair = 0.0;
  double l_spatial = 0.0;
  double l_tk = 0.0;
  std::vector<double> l_eig_per_pair;
  double l_temporal = 0.0;
  double q = 1.0;
  double alpha = 0.0;
  double beta = 0.0;
  double l_seg = 0.0;
};

struct PairwiseParams {
  double sim_thresh = 0.3;
  std::size_t dilation = 2;
};

/// Colour-similar neighbour pairs of a T x H' x W' grid, as flat indices into
/// one instance plane.
struct PairwiseEdges {
  std::size_t plane = 0;  // T * H' * W'
  std::vector<std::size_t> a, b;
  std::size_t size() const noexcept { return a.size(); }
};

/// Frame pairs (0,1), ..., (T-2,T-1), (T-1,0). Throws SingleFrame for T < 2.
std::vector<std::pair<std::size_t, std::size_t>> cyclic_pairs(std::size_t t_frames);

/// Edges at dilation d along the four undirected neighbour directions whose
/// grid-centre colours satisfy exp(-|c_i - c_j| / 0.5) >= sim_thresh.
PairwiseEdges pairwise_edges(const Tensor& frames, std::size_t grid_h, std::size_t grid_w,
                             const PairwiseParams& params);

// Tape builders. `m` is an N x T x H' x W' mask stack in [0, 1]; `e` the
// pre-sigmoid stack of the same shape.

ad::Var tk_pair_loss(ad::Tape& tape, ad::Var m, const matching::MatchMap& map, std::size_t t,
                     std::size_t t_hat);
ad::Var projection_loss(ad::Tape& tape, ad::Var m, const TensorD& boxmasks);
ad::Var pairwise_loss(ad::Tape& tape, ad::Var m, const PairwiseEdges& edges);

/// Smallest `y` Laplacian eigenvalues of every (instance, frame) plane of `e`,
/// indexed [n][t].
std::vector<std::vector<ad::Var>> frame_spectra(ad::Tape& tape, ad::Var e, std::size_t scale,
                                                std::size_t y);
/// Mean absolute eigenvalue difference between frames t and t_hat.
ad::Var tel_pair_loss(ad::Tape& tape, const std::vector<std::vector<ad::Var>>& spectra,
                      std::size_t t, std::size_t t_hat);

struct TemporalVars {
  ad::Var l_temporal;
  std::vector<ad::Var> l_tk;   // per cyclic pair
  std::vector<ad::Var> l_eig;  // per cyclic pair; empty when not computed
};

/// Sum over the cyclic pairs of L_tk + beta L_tk L_eig. `maps` holds one
/// MatchMap per cyclic pair. Eigenvalue terms are built when beta != 0 or
/// `with_eig` is set.
TemporalVars temporal_loss(ad::Tape& tape, ad::Var m, ad::Var e,
                           const std::vector<matching::MatchMap>& maps, double beta, std::size_t y,
                           std::size_t scale, bool with_eig);

// Value forms.

double tk_pair_loss(const TensorD& m, const matching::MatchMap& map, std::size_t t,
                    std::size_t t_hat);
double tel_pair_loss(std::span<const spectral::InstanceFeatureVector> e_t,
                     std::span<const spectral::InstanceFeatureVector> e_t_hat, std::size_t y);
double projection_loss(const TensorD& m, const TensorD& boxmasks);
double pairwise_loss(const TensorD& m, const Tensor& frames, const PairwiseParams& params);

struct TemporalResult {
  double l_temporal = 0.0;
  double l_tk_total = 0.0;
  std::vector<double> l_eig;
};
/// Composition from per-pair scalars.
TemporalResult temporal_loss(std::span<const double> l_tk, std::span<const double> l_eig, double beta);
TemporalResult temporal_loss(const TensorD& m, const TensorD& e,
                             const std::vector<matching::MatchMap>& maps, double beta, std::size_t y,
                             std::size_t scale);

/// q^alpha (l_spatial + l_temporal); q is a constant. Throws BadAlpha unless
/// alpha is 0 or 1.
double segmentation_loss(double l_spatial, double l_temporal, double q, double alpha);

}  // namespace ecvis::losses
