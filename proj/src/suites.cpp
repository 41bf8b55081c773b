#include "ecvis/suites.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "ecvis/error.hpp"
#include "ecvis/gradcheck.hpp"
#include "ecvis/losses.hpp"
#include "ecvis/spectral.hpp"
#include "ecvis/synth.hpp"

namespace ecvis::suites {
using ad::Tape;
using ad::Var;

namespace {

constexpr double kEps = 1e-5;

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void absorb(SuiteResult& s, const ad::GradReport& r) {
  s.worst = std::max(s.worst, r.max_rel_error);
  s.coords += r.n_checked;
}

// True when every nonzero eigenvalue among the first `count` of each plane is
// separated from the rest of its spectrum by more than min_gap.
bool well_separated(const TensorD& stack, std::size_t scale, std::size_t count, double min_gap) {
  for (std::size_t n = 0; n < stack.dim(0); ++n) {
    for (std::size_t t = 0; t < stack.dim(1); ++t) {
      const auto e = spectral::prepare_instance_features(stack.slice(n).slice(t), scale);
      const auto pack = spectral::feature_spectrum(e, count);
      for (std::size_t k = 0; k < count; ++k) {
        if (pack.values[k] > 1e-8 && !(pack.gaps[k] > min_gap)) return false;
      }
    }
  }
  return true;
}

// Max projections are differentiable only where each row and column maximum
// is unique; demand a margin well above the difference step.
bool clear_maxima(const TensorD& m, double margin) {
  const std::size_t h = m.dim(2), w = m.dim(3), planes = m.size() / (h * w);
  auto unique_top = [&](std::size_t base, std::size_t stride, std::size_t len) {
    double first = -1e300, second = -1e300;
    for (std::size_t k = 0; k < len; ++k) {
      const double v = m[base + k * stride];
      if (v > first) {
        second = first;
        first = v;
      } else if (v > second) {
        second = v;
      }
    }
    return first - second > margin;
  };
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t x = 0; x < w; ++x) {
      if (!unique_top(p * h * w + x, w, h)) return false;
    }
    for (std::size_t y = 0; y < h; ++y) {
      if (!unique_top(p * h * w + y * w, 1, w)) return false;
    }
  }
  return true;
}

TensorD random_tensor(Dims dims, Rng& rng, double lo, double hi) {
  TensorD t(std::move(dims));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

}  // namespace

SuiteResult spectral_gradients(std::size_t cases, std::uint64_t seed) {
  Timer timer;
  SuiteResult s{"spectral", false, 0.0, 1e-4};
  Rng rng(seed);
  while (s.cases < cases) {
    const std::size_t n = 3 + rng.below(30);
    spectral::InstanceFeatureVector e;
    for (std::size_t i = 0; i < n; ++i) {
      const double mag = rng.uniform(0.2, 1.5);
      e.values.push_back(rng.uniform() < 0.25 ? -mag : mag);
    }
    const std::size_t k = 1 + rng.below(std::min<std::size_t>(n - 1, 3));
    const auto la = spectral::laplacian(spectral::affinity(e));
    const auto pack = spectral::smallest_eigenvalues(la, k + 1);
    if (!(pack.gaps[k] > 1e-3)) continue;
    const auto g = spectral::chain_to_features(spectral::eigenvalue_grad(la, pack, k), e);
    const TensorD x({n}, e.values);
    auto f = [k](const TensorD& v) {
      return spectral::feature_spectrum(spectral::InstanceFeatureVector{v.storage()}, k + 1).values[k];
    };
    absorb(s, ad::gradcheck(f, TensorD({n}, g), x, kEps));
    ++s.cases;
  }
  s.pass = s.worst <= s.tolerance;
  s.seconds = timer.seconds();
  return s;
}

SuiteResult loss_gradients(std::size_t cases, std::uint64_t seed) {
  Timer timer;
  SuiteResult s{"losses", false, 0.0, 1e-4};
  Rng rng(seed);
  const std::size_t n_inst = 2, t_frames = 3, h = 8, w = 8, g = h * w;
  const Dims dims{n_inst, t_frames, h, w};
  while (s.cases < cases) {
    const TensorD m = random_tensor(dims, rng, 0.05, 0.95);
    if (!clear_maxima(m, 1e-3)) continue;

    matching::MatchMap map{h, w, std::vector<std::vector<matching::Match>>(g)};
    for (auto& list : map.lists) {
      const std::size_t count = rng.below(4);
      for (std::size_t j = 0; j < count; ++j) list.push_back({static_cast<std::size_t>(rng.below(g)), 0.0f});
    }
    absorb(s, ad::gradcheck([&](Tape& t, Var x) { return losses::tk_pair_loss(t, x, map, 0, 2); }, m, kEps));

    TensorD box(dims, 0.0);
    for (std::size_t p = 0; p < n_inst * t_frames; ++p) {
      const std::size_t y0 = rng.below(h / 2), x0 = rng.below(w / 2);
      const std::size_t y1 = y0 + 1 + rng.below(h - y0), x1 = x0 + 1 + rng.below(w - x0);
      for (std::size_t y = y0; y < std::min(y1, h); ++y) {
        for (std::size_t x = x0; x < std::min(x1, w); ++x) box[p * g + y * w + x] = 1.0;
      }
    }
    absorb(s, ad::gradcheck([&](Tape& t, Var x) { return losses::projection_loss(t, x, box); }, m, kEps));

    losses::PairwiseEdges edges;
    edges.plane = t_frames * g;
    for (std::size_t k = 0; k < 200; ++k) {
      edges.a.push_back(rng.below(edges.plane));
      edges.b.push_back(rng.below(edges.plane));
    }
    absorb(s, ad::gradcheck([&](Tape& t, Var x) { return losses::pairwise_loss(t, x, edges); }, m, kEps));

    TensorD e = random_tensor(dims, rng, -1.5, 1.5);
    if (!well_separated(e, 4, 3, 1e-3)) continue;
    absorb(s, ad::gradcheck(
                  [&](Tape& t, Var x) {
                    const auto spectra = losses::frame_spectra(t, x, 4, 3);
                    return losses::tel_pair_loss(t, spectra, 1, 2);
                  },
                  e, kEps));
    ++s.cases;
  }
  s.pass = s.worst <= s.tolerance;
  s.seconds = timer.seconds();
  return s;
}

EndToEndCase make_end_to_end_case(std::uint64_t seed, double min_gap) {
  EndToEndCase c;
  c.config.grid_stride = 2;
  c.config.seed = seed;
  synth::ClipSpec spec;
  spec.t_frames = 3;
  spec.height = 32;
  spec.width = 32;
  spec.n_instances = 2;
  spec.half_size_range = {3, 6};
  spec.noise_sigma = 0.02;
  spec.seed = seed;
  const synth::VideoClip clip = synth::generate_clip(spec);
  c.clip = prepare_clip(synth::ClipInputs{"e2e", clip.frames, clip.boxes}, c.config);
  Rng rng = Rng(seed).split(7);
  const TensorD bm = instance_boxmasks(c.clip);
  do {
    c.o = TensorD({c.config.channels, spec.t_frames, c.clip.grid_h, c.clip.grid_w});
    for (std::size_t i = 0; i < c.o.size(); ++i) c.o[i] = rng.normal();
  } while (!well_separated(c.o, c.config.scale, c.config.eig_count, min_gap));
  Rng match_rng = Rng(seed).split(1);
  c.assignment = matching::instance_sequence_match(c.o, c.clip.boxmasks, c.config.n_points, match_rng);
  const std::size_t counts[1] = {c.clip.instances()};
  c.q = batch_quality(std::span<const TensorD>(&c.o, 1), counts, c.config, Rng(seed).split(2));
  return c;
}

SuiteResult end_to_end_gradients(std::size_t cases, std::uint64_t seed) {
  Timer timer;
  SuiteResult s{"e2e", false, 0.0, 1e-3};
  Rng pick(seed);
  for (std::size_t k = 0; k < cases; ++k) {
    const EndToEndCase c = make_end_to_end_case(pick.next_u64());
    const std::size_t per_channel = c.o.size() / c.o.dim(0);
    std::vector<std::size_t> coords;
    for (const auto& [instance, channel] : c.assignment.pairs) {
      for (int j = 0; j < 24; ++j) coords.push_back(channel * per_channel + pick.below(per_channel));
    }
    for (int j = 0; j < 4; ++j) coords.push_back(pick.below(c.o.size()));
    auto f = [&c](Tape& t, Var x) {
      return build_clip_loss(t, x, c.clip, c.assignment, c.config, c.q, 1.0, c.config.beta, true, false).l_seg;
    };
    absorb(s, ad::gradcheck(f, c.o, kEps, coords));
    ++s.cases;
  }
  s.pass = s.worst <= s.tolerance;
  s.seconds = timer.seconds();
  return s;
}

}  // namespace ecvis::suites
