#include "ecvis/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "ecvis/tensor_io.hpp"

namespace ecvis::synth {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadSpec, p.string() + ": " + e.what());
  }
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + p.string() + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw Error(ErrorCode::IoFailure, "short write to " + p.string());
}

const char* kind_name(ShapeKind k) { return k == ShapeKind::Rectangle ? "rectangle" : "ellipse"; }

}  // namespace

json to_json(const ClipSpec& s) {
  json kinds = json::array();
  for (ShapeKind k : s.shape_kinds) kinds.push_back(kind_name(k));
  return json{{"t_frames", s.t_frames},
              {"height", s.height},
              {"width", s.width},
              {"n_instances", s.n_instances},
              {"shape_kinds", kinds},
              {"speed_range", {s.speed_range[0], s.speed_range[1]}},
              {"occlusion_level", s.occlusion_level},
              {"brightness_jitter", s.brightness_jitter},
              {"noise_sigma", s.noise_sigma},
              {"half_size_range", {s.half_size_range[0], s.half_size_range[1]}},
              {"seed", s.seed}};
}

ClipSpec clip_spec_from_json(const json& j) {
  static const char* const kKeys[] = {"t_frames",        "height",      "width",           "n_instances",
                                      "shape_kinds",     "speed_range", "occlusion_level", "brightness_jitter",
                                      "noise_sigma",     "half_size_range", "seed"};
  if (!j.is_object()) throw Error(ErrorCode::BadSpec, "clip spec must be a JSON object");
  for (const auto& item : j.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), item.key()) == std::end(kKeys)) {
      throw Error(ErrorCode::BadSpec, "unknown clip spec key '" + item.key() + "'");
    }
  }
  ClipSpec s;
  try {
    s.t_frames = j.value("t_frames", s.t_frames);
    s.height = j.value("height", s.height);
    s.width = j.value("width", s.width);
    s.n_instances = j.value("n_instances", s.n_instances);
    if (j.contains("shape_kinds")) {
      s.shape_kinds.clear();
      for (const auto& k : j.at("shape_kinds")) {
        const std::string name = k.get<std::string>();
        if (name == "rectangle") s.shape_kinds.push_back(ShapeKind::Rectangle);
        else if (name == "ellipse") s.shape_kinds.push_back(ShapeKind::Ellipse);
        else throw Error(ErrorCode::BadSpec, "unknown shape kind '" + name + "'");
      }
    }
    if (j.contains("speed_range")) s.speed_range = j.at("speed_range").get<std::array<double, 2>>();
    s.occlusion_level = j.value("occlusion_level", s.occlusion_level);
    s.brightness_jitter = j.value("brightness_jitter", s.brightness_jitter);
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    if (j.contains("half_size_range")) {
      s.half_size_range = j.at("half_size_range").get<std::array<std::size_t, 2>>();
    }
    s.seed = j.value("seed", s.seed);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadSpec, e.what());
  }
  validate(s);
  return s;
}

json boxes_to_json(const BoxSet& b) {
  json frames = json::array();
  for (std::size_t t = 0; t < b.frames; ++t) {
    json row = json::array();
    for (std::size_t i = 0; i < b.instances; ++i) {
      const Box& x = b.at(t, i);
      row.push_back({x.x0, x.y0, x.x1, x.y1});
    }
    frames.push_back(std::move(row));
  }
  return frames;
}

BoxSet boxes_from_json(const json& j, std::size_t height, std::size_t width) {
  BoxSet b;
  b.height = height;
  b.width = width;
  try {
    b.frames = j.size();
    if (b.frames == 0) throw Error(ErrorCode::BadSpec, "boxes.json holds no frames");
    b.instances = j.at(0).size();
    for (const auto& frame : j) {
      if (frame.size() != b.instances) throw Error(ErrorCode::BadSpec, "ragged boxes.json");
      for (const auto& box : frame) {
        const auto v = box.get<std::array<float, 4>>();
        b.boxes.push_back(Box{v[0], v[1], v[2], v[3]});
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadSpec, std::string("boxes.json: ") + e.what());
  }
  return b;
}

void write_clip(const VideoClip& clip, const ClipSpec& spec, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string());
  write_tensor(clip.frames, dir / "frames.ecvt", DType::F32);
  write_tensor(clip.gt_masks, dir / "gt_masks.ecvt", DType::U8);
  write_json(dir / "boxes.json", boxes_to_json(clip.boxes));
  write_json(dir / "clip.json", to_json(spec));
}

void write_dataset(const std::vector<ClipSpec>& specs, const fs::path& dir) {
  json manifest{{"version", 1}, {"clips", json::array()}};
  for (std::size_t i = 0; i < specs.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "clip_%03zu", i);
    write_clip(generate_clip(specs[i]), specs[i], dir / id);
    manifest["clips"].push_back({{"id", id},
                                 {"dir", id},
                                 {"spec", to_json(specs[i])},
                                 {"frames", "frames.ecvt"},
                                 {"boxes", "boxes.json"},
                                 {"gt_masks", "gt_masks.ecvt"}});
  }
  write_json(dir / "manifest.json", manifest);
}

Dataset Dataset::open(const fs::path& dir) {
  Dataset ds;
  if (fs::exists(dir / "manifest.json")) {
    const json m = read_json(dir / "manifest.json");
    try {
      for (const auto& c : m.at("clips")) {
        ds.clips_.push_back(Entry{c.at("id").get<std::string>(), dir / c.at("dir").get<std::string>(),
                                  c.value("frames", "frames.ecvt"), c.value("boxes", "boxes.json"),
                                  c.value("gt_masks", "gt_masks.ecvt")});
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::BadSpec, std::string("manifest.json: ") + e.what());
    }
  } else if (fs::exists(dir / "frames.ecvt")) {
    ds.clips_.push_back(Entry{dir.filename().string(), dir, "frames.ecvt", "boxes.json", "gt_masks.ecvt"});
  } else {
    throw Error(ErrorCode::IoFailure, dir.string() + " holds neither manifest.json nor frames.ecvt");
  }
  if (ds.clips_.empty()) throw Error(ErrorCode::BadSpec, "dataset has no clips");
  return ds;
}

ClipInputs Dataset::inputs(std::size_t i) const {
  const Entry& e = clips_.at(i);
  ClipInputs in;
  in.id = e.id;
  in.frames = read_tensor(e.dir / e.frames);
  if (in.frames.rank() != 4 || in.frames.dim(1) != 3) {
    throw Error(ErrorCode::ShapeMismatch, e.id + ": frames must be T x 3 x H x W");
  }
  in.boxes = boxes_from_json(read_json(e.dir / e.boxes), in.frames.dim(2), in.frames.dim(3));
  if (in.boxes.frames != in.frames.dim(0)) {
    throw Error(ErrorCode::ShapeMismatch, e.id + ": boxes.json frame count differs from frames");
  }
  return in;
}

Tensor Dataset::gt_masks(std::size_t i) const {
  gt_reads_->fetch_add(1);
  const Entry& e = clips_.at(i);
  return read_tensor(e.dir / e.gt_masks);
}

}  // namespace ecvis::synth
