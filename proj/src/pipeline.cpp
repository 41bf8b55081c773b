#include "ecvis/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "ecvis/clustering.hpp"
#include "ecvis/error.hpp"
#include "ecvis/spectral.hpp"

namespace ecvis {
using ad::Tape;
using ad::Var;

ClipData prepare_clip(const synth::ClipInputs& in, const Config& config) {
  const std::size_t h = in.frames.dim(2), w = in.frames.dim(3);
  if (h % config.grid_stride != 0 || w % config.grid_stride != 0) {
    throw Error(ErrorCode::BadGrid, "frame size not divisible by grid_stride");
  }
  return prepare_clip(in, config, h / config.grid_stride, w / config.grid_stride);
}

ClipData prepare_clip(const synth::ClipInputs& in, const Config& config, std::size_t grid_h,
                      std::size_t grid_w) {
  const std::size_t f = spectral::axis_factor(config.scale);
  if (grid_h == 0 || grid_w == 0 || grid_h % f != 0 || grid_w % f != 0) {
    throw Error(ErrorCode::BadGrid, "mask grid must be a nonzero multiple of the downsample factor");
  }
  ClipData clip;
  clip.id = in.id;
  clip.frames = in.frames;
  clip.boxes = in.boxes;
  clip.grid_h = grid_h;
  clip.grid_w = grid_w;
  clip.boxmasks = synth::boxes_to_boxmasks(in.boxes, grid_h, grid_w);
  for (const auto& [t, t_hat] : losses::cyclic_pairs(in.frames.dim(0))) {
    clip.maps.push_back(matching::temporal_knn_match(in.frames, t, t_hat, config.tk, grid_h, grid_w));
  }
  clip.edges = losses::pairwise_edges(in.frames, grid_h, grid_w, config.pairwise);
  clip.features = pixel_features(in.frames, grid_h, grid_w);
  return clip;
}

namespace {

std::vector<std::size_t> matched_index(const Dims& od, const matching::Assignment& a) {
  const std::size_t per_channel = od[1] * od[2] * od[3];
  std::vector<std::size_t> index;
  index.reserve(a.pairs.size() * per_channel);
  for (const auto& [instance, channel] : a.pairs) {
    if (channel >= od[0]) throw Error(ErrorCode::ShapeMismatch, "assigned channel out of range");
    for (std::size_t k = 0; k < per_channel; ++k) index.push_back(channel * per_channel + k);
  }
  return index;
}

}  // namespace

TensorD matched_logits(const TensorD& o, const matching::Assignment& a) {
  if (o.rank() != 4) throw Error(ErrorCode::ShapeMismatch, "O must be C x T x H' x W'");
  return ad::ops::gather(o, matched_index(o.dims(), a), {a.pairs.size(), o.dim(1), o.dim(2), o.dim(3)});
}

Var matched_logits(Tape& tape, Var o, const matching::Assignment& a) {
  const Dims od = tape.value(o).dims();
  if (od.size() != 4) throw Error(ErrorCode::ShapeMismatch, "O must be C x T x H' x W'");
  return tape.gather(o, matched_index(od, a), {a.pairs.size(), od[1], od[2], od[3]});
}

TensorD instance_boxmasks(const ClipData& clip) {
  const std::size_t t_frames = clip.boxmasks.dim(0), n = clip.boxmasks.dim(1);
  const std::size_t plane = clip.grid_h * clip.grid_w;
  TensorD out({n, t_frames, clip.grid_h, clip.grid_w});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < t_frames; ++t) {
      std::copy_n(clip.boxmasks.data() + (t * n + i) * plane, plane, out.data() + (i * t_frames + t) * plane);
    }
  }
  return out;
}

LossTerms build_clip_loss(Tape& tape, Var o, const ClipData& clip, const matching::Assignment& assignment,
                          const Config& config, double q, double alpha, double beta, bool temporal,
                          bool with_eig) {
  const Dims od = tape.value(o).dims();
  if (od.size() != 4 || od[1] != clip.frame_count() || od[2] != clip.grid_h || od[3] != clip.grid_w) {
    throw Error(ErrorCode::ShapeMismatch, "prediction " + dims_to_string(od) + " does not fit the clip grid");
  }
  if (assignment.pairs.size() != clip.instances()) {
    throw Error(ErrorCode::ShapeMismatch, "assignment does not cover every instance");
  }
  LossTerms out;
  Var e = matched_logits(tape, o, assignment);
  Var m = tape.sigmoid(e);
  out.l_proj = losses::projection_loss(tape, m, instance_boxmasks(clip));
  out.l_pair = losses::pairwise_loss(tape, m, clip.edges);
  out.l_spatial = tape.add(out.l_proj, out.l_pair);
  if (temporal) {
    losses::TemporalVars tv =
        losses::temporal_loss(tape, m, e, clip.maps, beta, config.eig_count, config.scale, with_eig);
    out.l_temporal = tv.l_temporal;
    out.l_tk = std::move(tv.l_tk);
    out.l_eig = std::move(tv.l_eig);
  } else {
    out.l_temporal = tape.constant(0.0);
    if (with_eig) {
      const auto spectra = losses::frame_spectra(tape, e, config.scale, config.eig_count);
      for (const auto& [t, t_hat] : losses::cyclic_pairs(clip.frame_count())) {
        out.l_eig.push_back(losses::tel_pair_loss(tape, spectra, t, t_hat));
      }
    }
  }
  if (alpha != 0.0 && alpha != 1.0) throw Error(ErrorCode::BadAlpha, "alpha must be 0 or 1");
  const double factor = alpha == 1.0 ? q : 1.0;
  out.l_seg = tape.mul(tape.constant(factor), tape.add(out.l_spatial, out.l_temporal));
  return out;
}

losses::LossReport read_report(const Tape& tape, const LossTerms& terms, double q, double alpha, double beta) {
  losses::LossReport r;
  r.l_proj = tape.scalar(terms.l_proj);
  r.l_pair = tape.scalar(terms.l_pair);
  r.l_spatial = tape.scalar(terms.l_spatial);
  for (Var v : terms.l_tk) r.l_tk += tape.scalar(v);
  for (Var v : terms.l_eig) r.l_eig_per_pair.push_back(tape.scalar(v));
  r.l_temporal = tape.scalar(terms.l_temporal);
  r.q = q;
  r.alpha = alpha;
  r.beta = beta;
  r.l_seg = tape.scalar(terms.l_seg);
  return r;
}

double batch_quality(std::span<const TensorD> o_per_clip, std::span<const std::size_t> instance_counts,
                     const Config& config, const Rng& rng) {
  try {
    return clustering::qcc(o_per_clip, instance_counts, config.scale, rng, config.kmeans_restarts).q;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CoincidentCentroids || e.code() == ErrorCode::SingleCluster ||
        e.code() == ErrorCode::TooFewPoints) {
      return 1.0;
    }
    throw;
  }
}

EvalResult eval_loss(const ClipData& clip, const TensorD& o, const Config& config) {
  validate(config);
  if (o.rank() != 4) throw Error(ErrorCode::ShapeMismatch, "prediction must be C x T x H' x W'");
  const Rng base(config.seed);
  Rng match_rng = base.split(1);
  EvalResult out;
  out.assignment = matching::instance_sequence_match(o, clip.boxmasks, config.n_points, match_rng);
  const std::size_t counts[1] = {clip.instances()};
  const double q = batch_quality(std::span<const TensorD>(&o, 1), counts, config, base.split(2));
  const double alpha = config.effective_alpha(config.steps);
  const double beta = config.effective_beta(config.steps);
  Tape tape;
  const LossTerms terms = build_clip_loss(tape, tape.constant(o), clip, out.assignment, config, q, alpha, beta,
                                           config.tk_on, true);
  out.report = read_report(tape, terms, q, alpha, beta);
  return out;
}

nlohmann::json to_json(const losses::LossReport& r) {
  return nlohmann::json{{"l_proj", r.l_proj},         {"l_pair", r.l_pair},
                        {"l_spatial", r.l_spatial},   {"l_tk", r.l_tk},
                        {"l_eig_per_pair", r.l_eig_per_pair},
                        {"l_temporal", r.l_temporal}, {"q", r.q},
                        {"alpha", r.alpha},           {"beta", r.beta},
                        {"l_seg", r.l_seg}};
}

}  // namespace ecvis
