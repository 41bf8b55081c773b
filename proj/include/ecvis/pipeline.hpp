#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ecvis/autodiff.hpp"
#include "ecvis/config.hpp"
#include "ecvis/dataset.hpp"
#include "ecvis/head.hpp"
#include "ecvis/losses.hpp"
#include "ecvis/matching.hpp"

namespace ecvis {

/// Everything the loss needs from one clip that does not depend on the
/// prediction: box masks, patch matches, colour edges and head features.
struct ClipData {
  std::string id;
  Tensor frames;
  synth::BoxSet boxes;
  std::size_t grid_h = 0, grid_w = 0;
  TensorD boxmasks;                       // T x I x H' x W'
  std::vector<matching::MatchMap> maps;   // one per cyclic frame pair
  losses::PairwiseEdges edges;
  PixelFeatures features;                 // on the mask grid

  std::size_t instances() const noexcept { return boxes.instances; }
  std::size_t frame_count() const noexcept { return boxes.frames; }
};

/// Mask grid of H / grid_stride x W / grid_stride.
ClipData prepare_clip(const synth::ClipInputs& in, const Config& config);
ClipData prepare_clip(const synth::ClipInputs& in, const Config& config, std::size_t grid_h,
                      std::size_t grid_w);

/// Matched pre-sigmoid stack E (N x T x H' x W'): channel of every assigned
/// instance, in instance order.
TensorD matched_logits(const TensorD& o, const matching::Assignment& assignment);
ad::Var matched_logits(ad::Tape& tape, ad::Var o, const matching::Assignment& assignment);

/// Box masks reordered to N x T x H' x W'.
TensorD instance_boxmasks(const ClipData& clip);

struct LossTerms {
  ad::Var l_seg, l_proj, l_pair, l_spatial, l_temporal;
  std::vector<ad::Var> l_tk, l_eig;
};

/// Loss graph of one clip from channel logits `o` (C x T x H' x W'). The
/// assignment and q are held fixed; `temporal` switches the TK/TEL terms.
LossTerms build_clip_loss(ad::Tape& tape, ad::Var o, const ClipData& clip,
                          const matching::Assignment& assignment, const Config& config, double q,
                          double alpha, double beta, bool temporal, bool with_eig);

losses::LossReport read_report(const ad::Tape& tape, const LossTerms& terms, double q, double alpha,
                               double beta);

/// Q of a batch of channel-logit tensors; degenerate clusterings count as
/// perfectly separated (Q contribution 0).
double batch_quality(std::span<const TensorD> o_per_clip, std::span<const std::size_t> instance_counts,
                     const Config& config, const Rng& rng);

struct EvalResult {
  losses::LossReport report;
  matching::Assignment assignment;
};

/// Full loss on a fixed prediction: matching, clustering, spectral terms and
/// losses with the configured alpha and beta (toggles applied).
EvalResult eval_loss(const ClipData& clip, const TensorD& o, const Config& config);

nlohmann::json to_json(const losses::LossReport& r);

}  // namespace ecvis
