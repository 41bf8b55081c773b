#include "ecvis/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ecvis/error.hpp"

namespace ecvis::losses {
namespace {

using ad::Tape;
using ad::Var;

// Left-to-right sum of scalar nodes; an empty list is the constant 0.
Var sum_vars(Tape& tape, const std::vector<Var>& terms) {
  if (terms.empty()) return tape.constant(0.0);
  Var acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = tape.add(acc, terms[i]);
  return acc;
}

// -(1/count) sum log(max(tau, floor)) with tau = a b + (1 - a)(1 - b).
Var agreement_loss(Tape& tape, Var m, std::vector<std::size_t> ia, std::vector<std::size_t> ib,
                   double count) {
  if (ia.empty()) return tape.constant(0.0);
  const Dims d{ia.size()};
  Var a = tape.gather(m, std::move(ia), d);
  Var b = tape.gather(m, std::move(ib), d);
  Var one = tape.constant(1.0);
  Var tau = tape.add(tape.mul(a, b), tape.mul(tape.sub(one, a), tape.sub(one, b)));
  Var s = tape.sum(tape.log(tape.clamp_min(tau, kTauFloor)));
  return tape.mul(s, tape.constant(-1.0 / count));
}

void require_stack(const TensorD& v, const char* what) {
  if (v.rank() != 4) {
    throw Error(ErrorCode::ShapeMismatch,
                std::string(what) + " must be N x T x H' x W', got " + dims_to_string(v.dims()));
  }
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> cyclic_pairs(std::size_t t_frames) {
  if (t_frames < 2) throw Error(ErrorCode::SingleFrame, "temporal terms need at least two frames");
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t t = 0; t + 1 < t_frames; ++t) pairs.emplace_back(t, t + 1);
  pairs.emplace_back(t_frames - 1, 0);
  return pairs;
}

PairwiseEdges pairwise_edges(const Tensor& frames, std::size_t grid_h, std::size_t grid_w,
                             const PairwiseParams& params) {
  if (frames.rank() != 4 || frames.dim(1) != 3) {
    throw Error(ErrorCode::ShapeMismatch, "frames must be T x 3 x H x W");
  }
  if (grid_h == 0 || grid_w == 0) throw Error(ErrorCode::BadGrid, "empty grid");
  const std::size_t t_frames = frames.dim(0);
  const std::size_t g = grid_h * grid_w;
  const double sy = static_cast<double>(frames.dim(2)) / static_cast<double>(grid_h);
  const double sx = static_cast<double>(frames.dim(3)) / static_cast<double>(grid_w);
  std::vector<double> colour(t_frames * g * 3);
  for (std::size_t t = 0; t < t_frames; ++t) {
    for (std::size_t gy = 0; gy < grid_h; ++gy) {
      for (std::size_t gx = 0; gx < grid_w; ++gx) {
        const double y = (static_cast<double>(gy) + 0.5) * sy - 0.5;
        const double x = (static_cast<double>(gx) + 0.5) * sx - 0.5;
        for (std::size_t c = 0; c < 3; ++c) {
          colour[((t * g) + gy * grid_w + gx) * 3 + c] = matching::sample_bilinear(frames, t, c, y, x);
        }
      }
    }
  }
  PairwiseEdges edges;
  edges.plane = t_frames * g;
  const long d = static_cast<long>(params.dilation);
  const long offsets[4][2] = {{0, d}, {d, 0}, {d, d}, {d, -d}};
  const long gh = static_cast<long>(grid_h), gw = static_cast<long>(grid_w);
  for (std::size_t t = 0; t < t_frames; ++t) {
    for (long y = 0; y < gh; ++y) {
      for (long x = 0; x < gw; ++x) {
        for (const auto& o : offsets) {
          const long y2 = y + o[0], x2 = x + o[1];
          if (y2 < 0 || y2 >= gh || x2 < 0 || x2 >= gw || (y2 == y && x2 == x)) continue;
          const std::size_t i = t * g + static_cast<std::size_t>(y * gw + x);
          const std::size_t j = t * g + static_cast<std::size_t>(y2 * gw + x2);
          double dist2 = 0.0;
          for (std::size_t c = 0; c < 3; ++c) {
            const double diff = colour[i * 3 + c] - colour[j * 3 + c];
            dist2 += diff * diff;
          }
          if (std::exp(-std::sqrt(dist2) / 0.5) >= params.sim_thresh) {
            edges.a.push_back(i);
            edges.b.push_back(j);
          }
        }
      }
    }
  }
  return edges;
}

Var tk_pair_loss(Tape& tape, Var m, const matching::MatchMap& map, std::size_t t, std::size_t t_hat) {
  const TensorD& mv = tape.value(m);
  require_stack(mv, "mask stack");
  const std::size_t n_inst = mv.dim(0), t_frames = mv.dim(1);
  const std::size_t g = mv.dim(2) * mv.dim(3);
  if (map.grid_h != mv.dim(2) || map.grid_w != mv.dim(3) || map.lists.size() != g) {
    throw Error(ErrorCode::ShapeMismatch, "match map grid differs from the mask grid");
  }
  if (t >= t_frames || t_hat >= t_frames) throw Error(ErrorCode::ShapeMismatch, "frame index out of range");
  std::vector<std::size_t> ia, ib;
  ia.reserve(n_inst * map.total_matches());
  ib.reserve(ia.capacity());
  for (std::size_t n = 0; n < n_inst; ++n) {
    const std::size_t base_t = (n * t_frames + t) * g;
    const std::size_t base_h = (n * t_frames + t_hat) * g;
    for (std::size_t p = 0; p < g; ++p) {
      for (const matching::Match& match : map.lists[p]) {
        if (match.target >= g) throw Error(ErrorCode::ShapeMismatch, "match target outside the grid");
        ia.push_back(base_t + p);
        ib.push_back(base_h + match.target);
      }
    }
  }
  return agreement_loss(tape, m, std::move(ia), std::move(ib), static_cast<double>(g * n_inst));
}

Var projection_loss(Tape& tape, Var m, const TensorD& boxmasks) {
  const TensorD mv = tape.value(m);  // the tape grows below
  require_stack(mv, "mask stack");
  if (mv.dims() != boxmasks.dims()) {
    throw Error(ErrorCode::ShapeMismatch, "box masks " + dims_to_string(boxmasks.dims()) +
                                              " differ from mask stack " + dims_to_string(mv.dims()));
  }
  const std::size_t planes = mv.dim(0) * mv.dim(1);
  const std::size_t h = mv.dim(2), w = mv.dim(3);
  std::vector<Var> terms;
  std::size_t count = 0;
  for (std::size_t p = 0; p < planes; ++p) {
    const double* mp = mv.data() + p * h * w;
    const double* bp = boxmasks.data() + p * h * w;
    // axis 0: project along y (one value per column); axis 1: along x.
    for (int axis = 0; axis < 2; ++axis) {
      const std::size_t len = axis == 0 ? w : h;
      const std::size_t across = axis == 0 ? h : w;
      std::vector<std::size_t> index(len);
      TensorD q({len});
      double qq = 0.0;
      for (std::size_t k = 0; k < len; ++k) {
        std::size_t best = 0;
        double best_v = -1.0, box_v = 0.0;
        for (std::size_t r = 0; r < across; ++r) {
          const std::size_t off = axis == 0 ? r * w + k : k * w + r;
          if (mp[off] > best_v) {
            best_v = mp[off];
            best = off;
          }
          box_v = std::max(box_v, bp[off]);
        }
        index[k] = p * h * w + best;
        q[k] = box_v;
        qq += box_v * box_v;
      }
      if (qq == 0.0) break;  // instance absent from this frame
      ++count;
      Var proj = tape.gather(m, std::move(index), Dims{len});
      Var num = tape.mul(tape.constant(2.0), tape.sum(tape.mul(proj, tape.constant(std::move(q)))));
      Var den = tape.add(tape.sum(tape.mul(proj, proj)), tape.constant(qq + matching::kDiceEps));
      terms.push_back(tape.div(num, den));
    }
  }
  if (count == 0) return tape.constant(0.0);
  const double c = static_cast<double>(count);
  return tape.mul(tape.sub(tape.constant(c), sum_vars(tape, terms)), tape.constant(1.0 / c));
}

Var pairwise_loss(Tape& tape, Var m, const PairwiseEdges& edges) {
  const TensorD& mv = tape.value(m);
  require_stack(mv, "mask stack");
  const std::size_t plane = mv.dim(1) * mv.dim(2) * mv.dim(3);
  if (plane != edges.plane) throw Error(ErrorCode::ShapeMismatch, "edge set built for another grid");
  const std::size_t n_inst = mv.dim(0);
  std::vector<std::size_t> ia, ib;
  ia.reserve(n_inst * edges.size());
  ib.reserve(ia.capacity());
  for (std::size_t n = 0; n < n_inst; ++n) {
    for (std::size_t k = 0; k < edges.size(); ++k) {
      ia.push_back(n * plane + edges.a[k]);
      ib.push_back(n * plane + edges.b[k]);
    }
  }
  const double count = static_cast<double>(ia.size());
  return agreement_loss(tape, m, std::move(ia), std::move(ib), count);
}

std::vector<std::vector<Var>> frame_spectra(Tape& tape, Var e, std::size_t scale, std::size_t y) {
  require_stack(tape.value(e), "feature stack");
  if (y == 0) throw Error(ErrorCode::BadConfig, "eigenvalue count must be >= 1");
  const std::size_t f = spectral::axis_factor(scale);
  Var down = tape.area_downsample(e, f);
  const Dims dd = tape.value(down).dims();
  const std::size_t n_inst = dd[0], t_frames = dd[1];
  const std::size_t len = dd[2] * dd[3];
  std::vector<std::vector<Var>> spectra(n_inst);
  for (std::size_t n = 0; n < n_inst; ++n) {
    for (std::size_t t = 0; t < t_frames; ++t) {
      std::vector<std::size_t> index(len);
      for (std::size_t k = 0; k < len; ++k) index[k] = (n * t_frames + t) * len + k;
      Var features = tape.gather(down, std::move(index), Dims{len});
      spectra[n].push_back(spectral::laplacian_eigenvalues(tape, features, y));
    }
  }
  return spectra;
}

Var tel_pair_loss(Tape& tape, const std::vector<std::vector<Var>>& spectra, std::size_t t,
                  std::size_t t_hat) {
  if (spectra.empty()) return tape.constant(0.0);
  std::vector<Var> per_instance;
  std::size_t entries = 0;
  for (const auto& frames : spectra) {
    per_instance.push_back(tape.sum(tape.abs(tape.sub(frames.at(t), frames.at(t_hat)))));
    entries += tape.value(frames.at(t)).size();
  }
  return tape.mul(sum_vars(tape, per_instance), tape.constant(1.0 / static_cast<double>(entries)));
}

TemporalVars temporal_loss(Tape& tape, Var m, Var e, const std::vector<matching::MatchMap>& maps,
                           double beta, std::size_t y, std::size_t scale, bool with_eig) {
  require_stack(tape.value(m), "mask stack");
  const Dims md = tape.value(m).dims();
  if (tape.value(e).dims() != md) {
    throw Error(ErrorCode::ShapeMismatch, "feature stack differs from mask stack");
  }
  const auto pairs = cyclic_pairs(md[1]);
  if (maps.size() != pairs.size()) {
    throw Error(ErrorCode::ShapeMismatch, "expected one match map per cyclic pair");
  }
  TemporalVars out;
  std::vector<std::vector<Var>> spectra;
  const bool eig = beta != 0.0 || with_eig;
  if (eig) spectra = frame_spectra(tape, e, scale, y);
  std::vector<Var> psi;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [t, t_hat] = pairs[k];
    Var tk = tk_pair_loss(tape, m, maps[k], t, t_hat);
    out.l_tk.push_back(tk);
    if (eig) out.l_eig.push_back(tel_pair_loss(tape, spectra, t, t_hat));
    if (beta != 0.0) {
      psi.push_back(tape.add(tk, tape.mul(tape.constant(beta), tape.mul(tk, out.l_eig.back()))));
    } else {
      psi.push_back(tk);
    }
  }
  out.l_temporal = sum_vars(tape, psi);
  return out;
}

double tk_pair_loss(const TensorD& m, const matching::MatchMap& map, std::size_t t, std::size_t t_hat) {
  Tape tape;
  return tape.scalar(tk_pair_loss(tape, tape.constant(m), map, t, t_hat));
}

double tel_pair_loss(std::span<const spectral::InstanceFeatureVector> e_t,
                     std::span<const spectral::InstanceFeatureVector> e_t_hat, std::size_t y) {
  if (e_t.size() != e_t_hat.size()) throw Error(ErrorCode::ShapeMismatch, "instance counts differ");
  if (y == 0) throw Error(ErrorCode::BadConfig, "eigenvalue count must be >= 1");
  double total = 0.0;
  std::size_t entries = 0;
  for (std::size_t n = 0; n < e_t.size(); ++n) {
    if (e_t[n].size() != e_t_hat[n].size()) {
      throw Error(ErrorCode::ShapeMismatch, "feature lengths differ between frames");
    }
    const auto a = spectral::feature_spectrum(e_t[n], y).values;
    const auto b = spectral::feature_spectrum(e_t_hat[n], y).values;
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a[k] - b[k]);
    total += s;
    entries += a.size();
  }
  return entries ? total * (1.0 / static_cast<double>(entries)) : 0.0;
}

double projection_loss(const TensorD& m, const TensorD& boxmasks) {
  Tape tape;
  return tape.scalar(projection_loss(tape, tape.constant(m), boxmasks));
}

double pairwise_loss(const TensorD& m, const Tensor& frames, const PairwiseParams& params) {
  require_stack(m, "mask stack");
  const PairwiseEdges edges = pairwise_edges(frames, m.dim(2), m.dim(3), params);
  Tape tape;
  return tape.scalar(pairwise_loss(tape, tape.constant(m), edges));
}

TemporalResult temporal_loss(std::span<const double> l_tk, std::span<const double> l_eig, double beta) {
  if (l_tk.size() < 2) throw Error(ErrorCode::SingleFrame, "temporal terms need at least two frames");
  if (beta != 0.0 && l_eig.size() != l_tk.size()) {
    throw Error(ErrorCode::ShapeMismatch, "one eigenvalue term per pair expected");
  }
  TemporalResult r;
  r.l_eig.assign(l_eig.begin(), l_eig.end());
  for (std::size_t k = 0; k < l_tk.size(); ++k) {
    r.l_tk_total += l_tk[k];
    r.l_temporal += beta != 0.0 ? l_tk[k] + beta * (l_tk[k] * l_eig[k]) : l_tk[k];
  }
  return r;
}

TemporalResult temporal_loss(const TensorD& m, const TensorD& e,
                             const std::vector<matching::MatchMap>& maps, double beta, std::size_t y,
                             std::size_t scale) {
  Tape tape;
  const TemporalVars v =
      temporal_loss(tape, tape.constant(m), tape.constant(e), maps, beta, y, scale, true);
  TemporalResult r;
  r.l_temporal = tape.scalar(v.l_temporal);
  for (Var tk : v.l_tk) r.l_tk_total += tape.scalar(tk);
  for (Var eig : v.l_eig) r.l_eig.push_back(tape.scalar(eig));
  return r;
}

double segmentation_loss(double l_spatial, double l_temporal, double q, double alpha) {
  if (alpha != 0.0 && alpha != 1.0) {
    throw Error(ErrorCode::BadAlpha, "alpha must be 0 or 1, got " + std::to_string(alpha));
  }
  if (!(q >= 1.0)) throw Error(ErrorCode::BadConfig, "cluster quality q must be >= 1");
  return (alpha == 1.0 ? q : 1.0) * (l_spatial + l_temporal);
}

}  // namespace ecvis::losses
