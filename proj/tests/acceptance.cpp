// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecvis/clustering.hpp"
#include "ecvis/config.hpp"
#include "ecvis/dataset.hpp"
#include "ecvis/head.hpp"
#include "ecvis/losses.hpp"
#include "ecvis/matching.hpp"
#include "ecvis/pipeline.hpp"
#include "ecvis/rng.hpp"
#include "ecvis/spectral.hpp"
#include "ecvis/suites.hpp"
#include "ecvis/training.hpp"
#include "oracles.hpp"

using namespace ecvis;
namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("[%s] %d %s: %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

spectral::InstanceFeatureVector random_features(Rng& rng, std::size_t n) {
  spectral::InstanceFeatureVector e;
  for (std::size_t i = 0; i < n; ++i) {
    e.values.push_back(rng.uniform(0.2, 1.5) * (rng.uniform() < 0.25 ? -1.0 : 1.0));
  }
  return e;
}

void spectral_suite() {
  const auto t0 = Clock::now();
  Rng rng(1);
  double worst_first = 0.0, worst_min = 0.0, worst_trace = 0.0, worst_cubic = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(63);
    const spectral::LaplacianMatrix l = spectral::laplacian(spectral::affinity(random_features(rng, n)));
    const spectral::EigenPack p = spectral::smallest_eigenvalues(l, std::min<std::size_t>(3, n));
    double trace = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) trace += l(i, i);
    for (double v : p.spectrum) {
      sum += v;
      worst_min = std::min(worst_min, v);
    }
    worst_first = std::max(worst_first, std::abs(p.values[0]));
    worst_trace = std::max(worst_trace, std::abs(sum - trace));
  }
  Rng cubic_rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(9);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = i; j < 3; ++j) a[i * 3 + j] = a[j * 3 + i] = cubic_rng.uniform(-2, 2);
    }
    const auto expect = oracle::cubic_eigenvalues(a);
    const auto got = spectral::jacobi_eigen(a, 3);
    for (std::size_t k = 0; k < 3; ++k) worst_cubic = std::max(worst_cubic, std::abs(got.values[k] - expect[k]));
  }
  const double secs = seconds_since(t0);
  const bool pass = worst_first <= 1e-8 && worst_min >= -1e-8 && worst_trace <= 1e-6 && worst_cubic <= 1e-8 &&
                    secs < 10.0;
  report(1, "spectral", pass,
         fmt("max|l1| %.2e, min eig %.2e, max|sum-trace| %.2e, max 3x3 err %.2e, %.2fs (limits 1e-8, -1e-8, "
             "1e-6, 1e-8, 10s)",
             worst_first, worst_min, worst_trace, worst_cubic, secs));
}

void gradient_suite() {
  const auto t0 = Clock::now();
  const suites::SuiteResult eig = suites::spectral_gradients(100, 1);
  const suites::SuiteResult seg = suites::end_to_end_gradients(10, 3);
  const double secs = seconds_since(t0);
  const bool pass = eig.worst <= 1e-4 && eig.cases == 100 && seg.worst <= 1e-3 && seg.cases == 10 && secs < 120.0;
  report(2, "gradients", pass,
         fmt("eigenvalue rel %.2e over %zu cases, l_seg rel %.2e over %zu cases, %.2fs (limits 1e-4, 1e-3, 120s)",
             eig.worst, eig.cases, seg.worst, seg.cases, secs));
}

void assignment_suite() {
  const auto t0 = Clock::now();
  Rng rng(2);
  int exact = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(7);
    TensorD m({n, n});
    for (double& v : m.values()) v = rng.uniform(-10, 10);
    const matching::Assignment a = matching::hungarian(m);
    // summed in row order, as the oracle does
    std::vector<std::size_t> col(n);
    for (auto [r, c] : a.pairs) col[r] = c;
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) total += m[r * n + col[r]];
    if (a.pairs.size() == n && total == oracle::exhaustive_assignment(m.storage(), n, n)) ++exact;
  }
  const double secs = seconds_since(t0);
  report(3, "assignment", exact == 200 && secs < 5.0,
         fmt("%d/200 exact matches with exhaustive search, %.2fs (limit 5s)", exact, secs));
}

void clustering_suite() {
  const auto t0 = Clock::now();
  Rng rng(8);
  double min_q = INFINITY;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t batch = 1 + rng.below(3);
    std::vector<TensorD> o;
    std::vector<std::size_t> counts;
    for (std::size_t b = 0; b < batch; ++b) {
      TensorD t({3, 2, 4, 4});
      for (double& v : t.values()) v = rng.normal();
      o.push_back(std::move(t));
      counts.push_back(1 + rng.below(3));
    }
    min_q = std::min(min_q, clustering::qcc(o, counts, 1, rng.split(trial)).q);
  }

  const clustering::PointSet line{2, {0, 0, 2, 0, 10, 0, 12, 0}};
  clustering::ClusterResult split;
  split.k = 2;
  split.assignments = {0, 0, 1, 1};
  split.centroids = {1, 0, 11, 0};
  const double db = clustering::davies_bouldin(line, split);

  int hits = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng data(1000 + seed);
    const std::size_t m = 3 + data.below(6);
    clustering::PointSet pts{2, {}};
    for (std::size_t i = 0; i < 2 * m; ++i) pts.data.push_back(data.uniform(-5, 5));
    const double best = oracle::exhaustive_two_means(pts.data, 2);
    Rng r(seed);
    if (std::abs(clustering::kmeans(pts, 2, r, 5).inertia - best) <= 1e-9 * std::max(1.0, best)) ++hits;
  }
  const bool pass = min_q >= 1.0 && std::abs(db - 0.2) <= 0.2 * 1e-6 && hits == 100;
  report(4, "clustering", pass,
         fmt("min Q %.6f (>= 1), d_b %.9f (0.2 rel 1e-6), 5-restart optimum on %d/100 seeds (100), %.2fs", min_q,
             db, hits, seconds_since(t0)));
}

void loss_value_suite() {
  const auto t0 = Clock::now();
  matching::MatchMap id;
  id.grid_h = id.grid_w = 4;
  id.lists.resize(16);
  for (std::size_t p = 0; p < 16; ++p) id.lists[p].push_back({p, 0.0f});
  const double tk = losses::tk_pair_loss(TensorD({1, 2, 4, 4}, 0.5), id, 0, 1);

  const std::vector<double> l_tk = {0.2, 0.4, 0.1}, l_eig = {1.0, 0.5, 2.0};
  const double temporal = losses::temporal_loss(l_tk, l_eig, 0.5).l_temporal;

  // identity over reports from real predictions
  std::vector<synth::ClipSpec> specs(10);
  for (std::size_t k = 0; k < specs.size(); ++k) {
    specs[k].seed = 200 + k;
    specs[k].t_frames = 3;
    specs[k].occlusion_level = 0.5;
  }
  const fs::path dir = fs::temp_directory_path() / "ecvis_acceptance" / "reports";
  fs::remove_all(dir);
  synth::write_dataset(specs, dir);
  const synth::Dataset data = synth::Dataset::open(dir);
  Config config;
  double worst = 0.0;
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    config.alpha = trial % 2 ? 1.0 : 0.0;
    config.beta = rng.uniform(0, 1);
    config.seed = static_cast<std::uint64_t>(trial);
    const ClipData clip = prepare_clip(data.inputs(static_cast<std::size_t>(trial) % data.size()), config);
    const TensorD o = ToyMaskHead::init(config.channels, rng.uniform(0.1, 2.0), rng).logits(clip.features);
    const losses::LossReport r = eval_loss(clip, o, config).report;
    const double expect = std::pow(r.q, r.alpha) * (r.l_spatial + r.l_temporal);
    worst = std::max(worst, std::abs(r.l_seg - expect) / std::max(1.0, std::abs(expect)));
  }
  const bool pass = std::abs(tk - 0.6931) <= 1e-4 && temporal == 1.0 && worst <= 1e-6;
  report(5, "loss values", pass,
         fmt("tk %.6f (0.6931 +- 1e-4), temporal %.17g (1.0 exact), max l_seg identity error %.2e (1e-6), %.2fs", tk,
             temporal, worst, seconds_since(t0)));
}

synth::Dataset suite_dataset(const fs::path& source, const fs::path& dir) {
  std::ifstream in(source);
  const json j = json::parse(in);
  const synth::ClipSpec base = synth::clip_spec_from_json(j.at("clip"));
  std::vector<synth::ClipSpec> specs;
  for (std::size_t i = 0; i < j.at("n_clips").get<std::size_t>(); ++i) {
    synth::ClipSpec s = base;
    s.seed = base.seed + i;
    specs.push_back(s);
  }
  fs::remove_all(dir);
  synth::write_dataset(specs, dir);
  return synth::Dataset::open(dir);
}

void ablation_trend(const synth::Dataset& data, const Config& toy) {
  const auto t0 = Clock::now();
  const std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  const AblationTable t = ablate(toy, data, seeds,
                                 {parse_ablation_setting("TK"), parse_ablation_setting("TK+TEL+QCC")});
  const AblationRow &tk = t.rows[0], &full = t.rows[1];
  const double secs = seconds_since(t0);
  const double gain = full.miou_mean - tk.miou_mean;
  const double ratio = full.flicker_mean / tk.flicker_mean;
  std::printf("%s", to_csv(t).c_str());
  report(6, "ablation trend", gain >= 0.005 && ratio <= 0.9 && secs < 900.0,
         fmt("miou %.4f -> %.4f (gain %+.4f, need >= +0.005), flicker %.3f -> %.3f (ratio %.3f, need <= 0.9), "
             "%.0fs (limit 900s)",
             tk.miou_mean, full.miou_mean, gain, tk.flicker_mean, full.flicker_mean, ratio, secs));
}

void determinism_and_hygiene(const synth::Dataset& data, const Config& toy) {
  const auto t0 = Clock::now();
  Config config = toy;
  config.steps = 20;
  config.seed = 9;
  const ClipData clip = prepare_clip(data.inputs(0), config);
  Rng rng(9);
  const TensorD o = ToyMaskHead::init(config.channels, 0.5, rng).logits(clip.features);
  const std::string e1 = to_json(eval_loss(clip, o, config).report).dump();
  const std::string e2 = to_json(eval_loss(clip, o, config).report).dump();

  const std::size_t reads_before = data.gt_reads();
  std::vector<std::string> dumps;
  std::size_t reads_during = 0;
  for (std::size_t threads : {1, 1, 4}) {
    config.threads = threads;
    const TrainResult r = train(config, data);
    reads_during += r.gt_reads_during_training;
    // metrics are left out so the dump is only what train produced
    dumps.push_back(to_json(r, Metrics{}, Metrics{}).dump());
  }
  reads_during += data.gt_reads() - reads_before;
  const bool same = e1 == e2 && dumps[0] == dumps[1] && dumps[0] == dumps[2];
  report(7, "determinism", same,
         fmt("eval_loss identical over 2 runs: %s; train identical over 2 runs and 1 vs 4 threads: %s, %.2fs",
             e1 == e2 ? "yes" : "no", (dumps[0] == dumps[1] && dumps[0] == dumps[2]) ? "yes" : "no",
             seconds_since(t0)));
  report(8, "supervision hygiene", reads_during == 0,
         fmt("%zu gt-mask reads over 3 train invocations", reads_during));
}

}  // namespace

int main() {
  const fs::path source = ECVIS_SOURCE_DIR;
  spectral_suite();
  gradient_suite();
  assignment_suite();
  clustering_suite();
  loss_value_suite();
  const synth::Dataset data = suite_dataset(source / "configs" / "suite.json",
                                            fs::temp_directory_path() / "ecvis_acceptance" / "suite");
  const Config toy = load_config(source / "configs" / "toy.json");
  ablation_trend(data, toy);
  determinism_and_hygiene(data, toy);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
