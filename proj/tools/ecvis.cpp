// ecvis: dataset generation, loss evaluation, training, ablation and
// gradient checks from the command line.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ecvis/config.hpp"
#include "ecvis/dataset.hpp"
#include "ecvis/error.hpp"
#include "ecvis/pipeline.hpp"
#include "ecvis/suites.hpp"
#include "ecvis/tensor_io.hpp"
#include "ecvis/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ecvis;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kBadInput = 2;

bool is_input_error(ErrorCode c) {
  switch (c) {
    case ErrorCode::BadMagic:
    case ErrorCode::BadHeader:
    case ErrorCode::DimOverflow:
    case ErrorCode::TruncatedPayload:
    case ErrorCode::IoFailure:
    case ErrorCode::NotDivisible:
    case ErrorCode::BadScale:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::TooFewChannels:
    case ErrorCode::BadGrid:
    case ErrorCode::SingleFrame:
    case ErrorCode::BadAlpha:
    case ErrorCode::BadSpec:
    case ErrorCode::BoxOutOfRange:
    case ErrorCode::BadConfig:
      return true;
    default:
      return false;
  }
}

json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadSpec, p.string() + ": " + e.what());
  }
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + p.string() + " for writing");
  out << text;
  if (!out) throw Error(ErrorCode::IoFailure, "short write to " + p.string());
}

Config config_or_default(const std::string& path) {
  return path.empty() ? Config{} : load_config(path);
}

// A single clip spec, {"n_clips": N, "clip": {...}} (seeds clip.seed + i), or
// {"clips": [{...}, ...]}.
int run_gen(const std::string& spec_path, const std::string& out) {
  const json j = read_json_file(spec_path);
  if (j.contains("n_clips") || j.contains("clips")) {
    std::vector<synth::ClipSpec> specs;
    if (j.contains("clips")) {
      for (const auto& c : j.at("clips")) specs.push_back(synth::clip_spec_from_json(c));
    } else {
      const synth::ClipSpec base = synth::clip_spec_from_json(j.value("clip", json::object()));
      const auto n = j.at("n_clips").get<std::size_t>();
      for (std::size_t i = 0; i < n; ++i) {
        synth::ClipSpec s = base;
        s.seed = base.seed + i;
        specs.push_back(s);
      }
    }
    if (specs.empty()) throw Error(ErrorCode::BadSpec, "dataset spec lists no clips");
    synth::write_dataset(specs, out);
    std::cout << "wrote " << specs.size() << " clips to " << out << "\n";
  } else {
    const synth::ClipSpec spec = synth::clip_spec_from_json(j);
    const synth::VideoClip clip = synth::generate_clip(spec);
    synth::write_clip(clip, spec, out);
    std::printf("wrote clip to %s (checksum %016llx)\n", out.c_str(),
                static_cast<unsigned long long>(synth::checksum(clip.frames)));
  }
  return kOk;
}

int run_eval_loss(const std::string& clip_dir, const std::string& pred_path, const std::string& cfg_path) {
  const Config config = config_or_default(cfg_path);
  const synth::Dataset data = synth::Dataset::open(clip_dir);
  const Tensor pred = read_tensor(pred_path);
  if (pred.rank() != 4) throw Error(ErrorCode::ShapeMismatch, "prediction must be C x T x H' x W'");
  const ClipData clip = prepare_clip(data.inputs(0), config, pred.dim(2), pred.dim(3));
  const EvalResult r = eval_loss(clip, pred.cast<double>(), config);
  json out = to_json(r.report);
  json pairs = json::array();
  for (const auto& [i, c] : r.assignment.pairs) pairs.push_back({i, c});
  out["assignment"] = pairs;
  std::cout << out.dump(2) << "\n";
  return kOk;
}

int run_train(const std::string& data_dir, const std::string& cfg_path, const std::string& out) {
  const Config config = config_or_default(cfg_path);
  const synth::Dataset data = synth::Dataset::open(data_dir);
  const TrainResult result = train(config, data);
  const Metrics initial = evaluate(config, result.initial_heads, data);
  const Metrics final_metrics = evaluate(config, result.heads, data);
  write_text(out, to_json(result, initial, final_metrics).dump(2) + "\n");
  std::printf("miou %.4f -> %.4f, eigen_flicker %.4f -> %.4f, gt reads during training %zu\n", initial.miou,
              final_metrics.miou, initial.eigen_flicker, final_metrics.eigen_flicker,
              result.gt_reads_during_training);
  return kOk;
}

std::vector<std::uint64_t> parse_seeds(const std::string& list) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::BadConfig, "bad seed '" + item + "'");
    }
  }
  return seeds;
}

int run_ablate(const std::string& data_dir, const std::string& cfg_path, const std::string& seeds,
               const std::string& rows, bool y_sweep, const std::string& out, const std::string& svg) {
  const Config config = config_or_default(cfg_path);
  const synth::Dataset data = synth::Dataset::open(data_dir);
  std::vector<AblationSetting> settings;
  if (rows.empty()) {
    settings = default_ablation_settings(y_sweep);
  } else {
    std::stringstream ss(rows);
    std::string name;
    while (std::getline(ss, name, ',')) settings.push_back(parse_ablation_setting(name));
  }
  const std::vector<std::uint64_t> seed_list = parse_seeds(seeds);
  const AblationTable table = ablate(config, data, seed_list, settings);
  const std::string csv = to_csv(table);
  write_text(out, csv);
  if (!svg.empty()) write_text(svg, to_svg(table));
  std::cout << csv;
  return kOk;
}

int run_gradcheck(const std::string& suite) {
  std::vector<suites::SuiteResult> results;
  if (suite == "spectral" || suite == "all") results.push_back(suites::spectral_gradients());
  if (suite == "losses" || suite == "all") results.push_back(suites::loss_gradients());
  if (suite == "e2e" || suite == "all") results.push_back(suites::end_to_end_gradients());
  bool ok = true;
  for (const auto& r : results) {
    std::printf("%s %s: max rel error %.3e (tol %.0e) over %zu cases, %zu coords, %.2fs\n",
                r.pass ? "PASS" : "FAIL", r.name.c_str(), r.worst, r.tolerance, r.cases, r.coords, r.seconds);
    ok = ok && r.pass;
  }
  return ok ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ecvis: eigen-consistent video instance segmentation toolkit"};
  app.require_subcommand(1);

  std::string spec_path, out_path, clip_dir, pred_path, cfg_path, data_dir, seeds = "1,2,3", rows, svg_path;
  std::string suite = "all";
  bool y_sweep = false;

  auto* gen = app.add_subcommand("gen", "generate a synthetic clip or dataset");
  gen->add_option("--spec", spec_path, "clip or dataset spec (JSON)")->required();
  gen->add_option("--out", out_path, "output directory")->required();

  auto* ev = app.add_subcommand("eval-loss", "evaluate every loss term on a fixed prediction");
  ev->add_option("--clip", clip_dir, "clip directory")->required();
  ev->add_option("--pred", pred_path, "channel logits C x T x H' x W' (.ecvt)")->required();
  ev->add_option("--config", cfg_path, "config JSON");

  auto* tr = app.add_subcommand("train", "train toy mask heads on a dataset");
  tr->add_option("--data", data_dir, "dataset directory")->required();
  tr->add_option("--config", cfg_path, "config JSON");
  tr->add_option("--out", out_path, "report JSON")->required();

  auto* ab = app.add_subcommand("ablate", "component ablation over seeds");
  ab->add_option("--data", data_dir, "dataset directory")->required();
  ab->add_option("--config", cfg_path, "config JSON");
  ab->add_option("--seeds", seeds, "comma-separated seeds (at least three)");
  ab->add_option("--rows", rows, "comma-separated rows such as TK,TK+TEL+QCC,TK+TEL+QCC/Y=2");
  ab->add_flag("--y-sweep", y_sweep, "add eigenvalue counts 2 and 4 to the full row");
  ab->add_option("--out", out_path, "CSV output")->required();
  ab->add_option("--svg", svg_path, "bar chart output");

  auto* gc = app.add_subcommand("gradcheck", "analytic against finite-difference gradients");
  gc->add_option("--suite", suite, "spectral, losses, e2e or all")
      ->check(CLI::IsMember({"spectral", "losses", "e2e", "all"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadInput;
  }

  try {
    if (*gen) return run_gen(spec_path, out_path);
    if (*ev) return run_eval_loss(clip_dir, pred_path, cfg_path);
    if (*tr) return run_train(data_dir, cfg_path, out_path);
    if (*ab) return run_ablate(data_dir, cfg_path, seeds, rows, y_sweep, out_path, svg_path);
    if (*gc) return run_gradcheck(suite);
  } catch (const Error& e) {
    std::cerr << "ecvis: " << e.what() << "\n";
    return is_input_error(e.code()) ? kBadInput : kFailure;
  } catch (const json::exception& e) {
    std::cerr << "ecvis: " << e.what() << "\n";
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "ecvis: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}
