#include "ecvis/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include "ecvis/error.hpp"
#include "ecvis/spectral.hpp"

namespace ecvis {
using ad::Tape;
using ad::Var;

namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers. Callers write only
// to slot i, so results do not depend on the schedule.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

bool finite(const losses::LossReport& r) {
  for (double v : {r.l_seg, r.l_spatial, r.l_temporal, r.q}) {
    if (!std::isfinite(v)) return false;
  }
  return std::all_of(r.l_eig_per_pair.begin(), r.l_eig_per_pair.end(), [](double v) { return std::isfinite(v); });
}

losses::LossReport batch_mean(const std::vector<losses::LossReport>& parts) {
  losses::LossReport m = parts.front();
  const double inv = 1.0 / static_cast<double>(parts.size());
  auto avg = [&](double losses::LossReport::*field) {
    double s = 0.0;
    for (const auto& p : parts) s += p.*field;
    m.*field = s * inv;
  };
  avg(&losses::LossReport::l_proj);
  avg(&losses::LossReport::l_pair);
  avg(&losses::LossReport::l_spatial);
  avg(&losses::LossReport::l_tk);
  avg(&losses::LossReport::l_temporal);
  avg(&losses::LossReport::l_seg);
  for (std::size_t k = 0; k < m.l_eig_per_pair.size(); ++k) {
    double s = 0.0;
    for (const auto& p : parts) s += p.l_eig_per_pair.at(k);
    m.l_eig_per_pair[k] = s * inv;
  }
  return m;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

double miou(const Tensor& pred, const Tensor& gt) {
  if (pred.dims() != gt.dims() || pred.rank() != 4) {
    throw Error(ErrorCode::ShapeMismatch, "miou needs equal T x I x H x W masks, got " +
                                              dims_to_string(pred.dims()) + " and " + dims_to_string(gt.dims()));
  }
  const std::size_t planes = pred.dim(0) * pred.dim(1);
  const std::size_t plane = pred.dim(2) * pred.dim(3);
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t p = 0; p < planes; ++p) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t k = p * plane; k < (p + 1) * plane; ++k) {
      const bool a = pred[k] > 0.5f, b = gt[k] > 0.5f;
      inter += a && b;
      uni += a || b;
    }
    if (uni == 0) continue;
    total += static_cast<double>(inter) / static_cast<double>(uni);
    ++counted;
  }
  return counted ? total / static_cast<double>(counted) : 1.0;
}

double eigen_flicker(const TensorD& matched, const Config& config) {
  if (matched.rank() != 4) throw Error(ErrorCode::ShapeMismatch, "matched stack must be N x T x H' x W'");
  const std::size_t n_inst = matched.dim(0);
  std::vector<std::vector<spectral::InstanceFeatureVector>> per_frame(matched.dim(1));
  for (std::size_t t = 0; t < matched.dim(1); ++t) {
    for (std::size_t n = 0; n < n_inst; ++n) {
      per_frame[t].push_back(spectral::prepare_instance_features(matched.slice(n).slice(t), config.scale));
    }
  }
  const auto pairs = losses::cyclic_pairs(matched.dim(1));
  double s = 0.0;
  for (const auto& [t, t_hat] : pairs) s += losses::tel_pair_loss(per_frame[t], per_frame[t_hat], config.eig_count);
  return s / static_cast<double>(pairs.size());
}

TrainResult train(const Config& config, const synth::Dataset& data, bool keep_history) {
  validate(config);
  const std::size_t reads_before = data.gt_reads();
  const std::size_t batch = data.size();
  std::vector<ClipData> clips(batch);
  parallel_for(batch, config.threads, [&](std::size_t b) { clips[b] = prepare_clip(data.inputs(b), config); });

  TrainResult result;
  result.config = config;
  const Rng base(config.seed);
  std::vector<std::size_t> counts(batch);
  std::vector<TensorD> velocity(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    result.clip_ids.push_back(clips[b].id);
    Rng init = base.split(0).split(b);
    result.heads.push_back(ToyMaskHead::init(config.channels, config.init_sigma, init));
    counts[b] = clips[b].instances();
    velocity[b] = TensorD(result.heads[b].weights().dims(), 0.0);
  }
  result.initial_heads = result.heads;

  std::vector<TensorD> logits(batch);
  std::vector<matching::Assignment> assignments(batch);
  std::vector<losses::LossReport> reports(batch);
  std::vector<TensorD> grads(batch);
  for (std::size_t step = 0; step < config.steps; ++step) {
    const double alpha = config.effective_alpha(step);
    const double beta = config.effective_beta(step);
    const Rng match_base = base.split(1).split(step);
    parallel_for(batch, config.threads, [&](std::size_t b) {
      logits[b] = result.heads[b].logits(clips[b].features);
      Rng rng = match_base.split(b);
      if (!logits[b].all_finite()) return;
      assignments[b] = matching::instance_sequence_match(logits[b], clips[b].boxmasks, config.n_points, rng);
    });
    for (std::size_t b = 0; b < batch; ++b) {
      if (!logits[b].all_finite()) {
        throw Error(ErrorCode::DivergenceDetected,
                    "non-finite logits at step " + std::to_string(step) + " on " + clips[b].id);
      }
    }
    const double q = alpha != 0.0 ? batch_quality(logits, counts, config, base.split(2).split(step)) : 1.0;
    std::vector<char> blew_up(batch, 0);
    parallel_for(batch, config.threads, [&](std::size_t b) {
      try {
        Tape tape;
        Var w = tape.input("w", result.heads[b].weights());
        Var o = head_logits(tape, w, clips[b].features);
        const LossTerms terms = build_clip_loss(tape, o, clips[b], assignments[b], config, q, alpha, beta,
                                                  config.tk_on, false);
        reports[b] = read_report(tape, terms, q, alpha, beta);
        grads[b] = tape.backward(terms.l_seg)["w"];
      } catch (const Error& e) {
        // Overflowed affinities surface here before any loss value exists.
        if (e.code() != ErrorCode::NonFiniteValue && e.code() != ErrorCode::NoConvergence) throw;
        blew_up[b] = 1;
      }
    });
    for (std::size_t b = 0; b < batch; ++b) {
      if (blew_up[b] || !finite(reports[b]) || !grads[b].all_finite()) {
        throw Error(ErrorCode::DivergenceDetected,
                    "non-finite loss or gradient at step " + std::to_string(step) + " on " + clips[b].id);
      }
    }
    if (keep_history) result.history.push_back(batch_mean(reports));
    for (std::size_t b = 0; b < batch; ++b) {
      TensorD& w = result.heads[b].weights();
      for (std::size_t k = 0; k < w.size(); ++k) {
        velocity[b][k] = config.momentum * velocity[b][k] + grads[b][k];
        w[k] -= config.lr * velocity[b][k];
      }
    }
  }
  result.gt_reads_during_training = data.gt_reads() - reads_before;
  if (result.gt_reads_during_training != 0) {
    throw Error(ErrorCode::SupervisionLeak, "ground-truth masks were read during training");
  }
  return result;
}

Metrics evaluate(const Config& config, const std::vector<ToyMaskHead>& heads, const synth::Dataset& data) {
  if (heads.size() != data.size()) throw Error(ErrorCode::ShapeMismatch, "one head per clip expected");
  Metrics m;
  m.per_clip.resize(data.size());
  const Rng base(config.seed);
  parallel_for(data.size(), config.threads, [&](std::size_t b) {
    const synth::ClipInputs in = data.inputs(b);
    const std::size_t h = in.frames.dim(2), w = in.frames.dim(3);
    const std::size_t gh = h / config.grid_stride, gw = w / config.grid_stride;
    const TensorD o = heads[b].logits(pixel_features(in.frames, gh, gw));
    Rng rng = base.split(3).split(b);
    const matching::Assignment a = matching::instance_sequence_match(
        o, synth::boxes_to_boxmasks(in.boxes, gh, gw), config.n_points, rng);
    const TensorD full = heads[b].logits(pixel_features(in.frames, h, w));
    const std::size_t t_frames = in.frames.dim(0), n = a.pairs.size(), plane = h * w;
    Tensor pred({t_frames, n, h, w});
    for (const auto& [i, c] : a.pairs) {
      for (std::size_t t = 0; t < t_frames; ++t) {
        const double* src = full.data() + (c * t_frames + t) * plane;
        float* dst = pred.data() + (t * n + i) * plane;
        for (std::size_t k = 0; k < plane; ++k) dst[k] = src[k] > 0.0 ? 1.0f : 0.0f;
      }
    }
    m.per_clip[b].id = in.id;
    m.per_clip[b].eigen_flicker = eigen_flicker(matched_logits(o, a), config);
    m.per_clip[b].miou = miou(pred, data.gt_masks(b));
  });
  for (const auto& c : m.per_clip) {
    m.miou += c.miou;
    m.eigen_flicker += c.eigen_flicker;
  }
  m.miou /= static_cast<double>(m.per_clip.size());
  m.eigen_flicker /= static_cast<double>(m.per_clip.size());
  return m;
}

nlohmann::json to_json(const TrainResult& r, const Metrics& initial, const Metrics& final_metrics) {
  using nlohmann::json;
  auto metrics_json = [](const Metrics& m) {
    json clips = json::array();
    for (const auto& c : m.per_clip) {
      clips.push_back({{"id", c.id}, {"miou", c.miou}, {"eigen_flicker", c.eigen_flicker}});
    }
    return json{{"miou", m.miou}, {"eigen_flicker", m.eigen_flicker}, {"per_clip", clips}};
  };
  json steps = json::array();
  for (const auto& s : r.history) steps.push_back(to_json(s));
  json heads = json::array();
  for (std::size_t b = 0; b < r.heads.size(); ++b) {
    heads.push_back({{"clip", r.clip_ids[b]}, {"weights", r.heads[b].weights().storage()}});
  }
  Config cfg = r.config;
  cfg.threads = 1;  // the report must not depend on the worker count
  return json{{"config", to_json(cfg)},
              {"gt_reads_during_training", r.gt_reads_during_training},
              {"initial_metrics", metrics_json(initial)},
              {"final_metrics", metrics_json(final_metrics)},
              {"steps", steps},
              {"heads", heads}};
}

std::vector<AblationSetting> default_ablation_settings(bool y_sweep) {
  std::vector<AblationSetting> s{{"TK", false, false, 3},
                                 {"TK+QCC", false, true, 3},
                                 {"TK+TEL", true, false, 3},
                                 {"TK+TEL+QCC", true, true, 3}};
  if (y_sweep) {
    s.push_back({"TK+TEL+QCC/Y=2", true, true, 2});
    s.push_back({"TK+TEL+QCC/Y=4", true, true, 4});
  }
  return s;
}

AblationSetting parse_ablation_setting(const std::string& name) {
  AblationSetting s;
  s.name = name;
  std::string body = name;
  if (const auto slash = name.find("/Y="); slash != std::string::npos) {
    try {
      s.eig_count = std::stoul(name.substr(slash + 3));
    } catch (const std::exception&) {
      throw Error(ErrorCode::BadConfig, "bad eigenvalue count in '" + name + "'");
    }
    body = name.substr(0, slash);
  }
  std::stringstream ss(body);
  std::string part;
  bool tk = false;
  while (std::getline(ss, part, '+')) {
    if (part == "TK") tk = true;
    else if (part == "TEL") s.tel_on = true;
    else if (part == "QCC") s.qcc_on = true;
    else throw Error(ErrorCode::BadConfig, "unknown component '" + part + "' in '" + name + "'");
  }
  if (!tk) throw Error(ErrorCode::BadConfig, "every ablation row includes TK: '" + name + "'");
  return s;
}

AblationTable ablate(const Config& base, const synth::Dataset& data, std::span<const std::uint64_t> seeds,
                     const std::vector<AblationSetting>& settings) {
  if (seeds.size() < 3) throw Error(ErrorCode::BadConfig, "ablation needs at least three seeds");
  AblationTable table;
  table.seeds.assign(seeds.begin(), seeds.end());
  for (const AblationSetting& s : settings) {
    AblationRow row;
    row.setting = s;
    for (std::uint64_t seed : seeds) {
      Config c = base;
      c.seed = seed;
      c.tk_on = true;
      c.tel_on = s.tel_on;
      c.qcc_on = s.qcc_on;
      c.eig_count = s.eig_count;
      const TrainResult r = train(c, data, false);
      const Metrics m = evaluate(c, r.heads, data);
      row.miou.push_back(m.miou);
      row.flicker.push_back(m.eigen_flicker);
    }
    row.miou_mean = mean(row.miou);
    row.miou_std = sample_std(row.miou);
    row.flicker_mean = mean(row.flicker);
    row.flicker_std = sample_std(row.flicker);
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string to_csv(const AblationTable& t) {
  std::ostringstream out;
  out << "row,tk,tel,qcc,eig_count,n_seeds,miou_mean,miou_std,eigen_flicker_mean,eigen_flicker_std\n";
  char buf[256];
  for (const auto& r : t.rows) {
    std::snprintf(buf, sizeof buf, "%s,1,%d,%d,%zu,%zu,%.6f,%.6f,%.6f,%.6f\n", r.setting.name.c_str(),
                  r.setting.tel_on ? 1 : 0, r.setting.qcc_on ? 1 : 0, r.setting.eig_count, r.miou.size(),
                  r.miou_mean, r.miou_std, r.flicker_mean, r.flicker_std);
    out << buf;
  }
  return out.str();
}

std::string to_svg(const AblationTable& t) {
  const double bar = 60, gap = 30, left = 60, top = 30, height = 240;
  const double width = left + static_cast<double>(t.rows.size()) * (bar + gap) + gap;
  std::ostringstream s;
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                "font-family=\"sans-serif\" font-size=\"11\">\n",
                width, top + height + 60);
  s << buf;
  std::snprintf(buf, sizeof buf, "<line x1=\"%.0f\" y1=\"%.0f\" x2=\"%.0f\" y2=\"%.0f\" stroke=\"black\"/>\n", left,
                top, left, top + height);
  s << buf;
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = tick * 0.25;
    const double y = top + height * (1.0 - v);
    std::snprintf(buf, sizeof buf, "<text x=\"%.0f\" y=\"%.1f\" text-anchor=\"end\">%.2f</text>\n", left - 6, y + 4, v);
    s << buf;
  }
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    const double x = left + gap + static_cast<double>(i) * (bar + gap);
    const double v = std::clamp(r.miou_mean, 0.0, 1.0);
    const double y = top + height * (1.0 - v);
    std::snprintf(buf, sizeof buf, "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.0f\" height=\"%.1f\" fill=\"#4a78b0\"/>\n", x,
                  y, bar, top + height - y);
    s << buf;
    const double lo = top + height * (1.0 - std::clamp(r.miou_mean - r.miou_std, 0.0, 1.0));
    const double hi = top + height * (1.0 - std::clamp(r.miou_mean + r.miou_std, 0.0, 1.0));
    std::snprintf(buf, sizeof buf, "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n",
                  x + bar / 2, lo, x + bar / 2, hi);
    s << buf;
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.0f\" text-anchor=\"middle\">%s</text>\n", x + bar / 2,
                  top + height + 16, r.setting.name.c_str());
    s << buf;
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%.3f</text>\n", x + bar / 2,
                  y - 4, r.miou_mean);
    s << buf;
  }
  std::snprintf(buf, sizeof buf, "<text x=\"%.0f\" y=\"%.0f\">mean mIoU over %zu seeds</text>\n", left,
                top + height + 40, t.seeds.size());
  s << buf << "</svg>\n";
  return s.str();
}

}  // namespace ecvis
