#include "ecvis/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <string>

#include "ecvis/error.hpp"

namespace ecvis {
using nlohmann::json;

namespace {

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadConfig, std::string(key) + ": " + e.what());
  }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::BadConfig, where + " must be a JSON object");
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) throw Error(ErrorCode::BadConfig, "unknown key '" + where + item.key() + "'");
  }
}

}  // namespace

double Config::effective_alpha(std::size_t step) const {
  if (!qcc_on || step < two_stage_step) return 0.0;
  return alpha;
}

double Config::effective_beta(std::size_t step) const {
  if (!tel_on || step < two_stage_step) return 0.0;
  return beta;
}

void validate(const Config& c) {
  const auto root = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(c.scale))));
  if (c.scale == 0 || root * root != c.scale) throw Error(ErrorCode::BadConfig, "scale must be a perfect square");
  if (c.eig_count == 0) throw Error(ErrorCode::BadConfig, "eig_count must be >= 1");
  if (!(c.beta >= 0.0) || !std::isfinite(c.beta)) throw Error(ErrorCode::BadConfig, "beta must be >= 0");
  if (c.alpha != 0.0 && c.alpha != 1.0) throw Error(ErrorCode::BadAlpha, "alpha must be 0 or 1");
  if (c.tk.top_k == 0) throw Error(ErrorCode::BadConfig, "tk.top_k must be >= 1");
  if (!(c.tk.reject_thresh > 0.0)) throw Error(ErrorCode::BadConfig, "tk.reject_thresh must be > 0");
  if (c.pairwise.dilation == 0) throw Error(ErrorCode::BadConfig, "pairwise.dilation must be >= 1");
  if (c.n_points == 0) throw Error(ErrorCode::BadConfig, "n_points must be >= 1");
  if (!(c.lr > 0.0) || !std::isfinite(c.lr)) throw Error(ErrorCode::BadConfig, "lr must be > 0");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw Error(ErrorCode::BadConfig, "momentum must be in [0, 1)");
  if (c.channels == 0) throw Error(ErrorCode::BadConfig, "channels must be >= 1");
  if (c.grid_stride == 0) throw Error(ErrorCode::BadConfig, "grid_stride must be >= 1");
  if (!(c.init_sigma > 0.0)) throw Error(ErrorCode::BadConfig, "init_sigma must be > 0");
  if (c.kmeans_restarts == 0) throw Error(ErrorCode::BadConfig, "kmeans_restarts must be >= 1");
  if (c.threads == 0) throw Error(ErrorCode::BadConfig, "threads must be >= 1");
}

Config config_from_json(const json& j) {
  reject_unknown(j,
                 {"scale", "eig_count", "beta", "alpha", "tk", "pairwise", "n_points", "lr", "momentum",
                  "steps", "seed", "tel_on", "qcc_on", "tk_on", "channels", "grid_stride", "init_sigma",
                  "kmeans_restarts", "two_stage_step", "threads"},
                 "");
  Config c;
  read(j, "scale", c.scale);
  read(j, "eig_count", c.eig_count);
  read(j, "beta", c.beta);
  read(j, "alpha", c.alpha);
  if (j.contains("tk")) {
    const json& t = j.at("tk");
    reject_unknown(t, {"window_radius", "patch_half", "top_k", "reject_thresh"}, "tk.");
    read(t, "window_radius", c.tk.window_radius);
    read(t, "patch_half", c.tk.patch_half);
    read(t, "top_k", c.tk.top_k);
    read(t, "reject_thresh", c.tk.reject_thresh);
  }
  if (j.contains("pairwise")) {
    const json& p = j.at("pairwise");
    reject_unknown(p, {"sim_thresh", "dilation"}, "pairwise.");
    read(p, "sim_thresh", c.pairwise.sim_thresh);
    read(p, "dilation", c.pairwise.dilation);
  }
  read(j, "n_points", c.n_points);
  read(j, "lr", c.lr);
  read(j, "momentum", c.momentum);
  read(j, "steps", c.steps);
  read(j, "seed", c.seed);
  read(j, "tel_on", c.tel_on);
  read(j, "qcc_on", c.qcc_on);
  read(j, "tk_on", c.tk_on);
  read(j, "channels", c.channels);
  read(j, "grid_stride", c.grid_stride);
  read(j, "init_sigma", c.init_sigma);
  read(j, "kmeans_restarts", c.kmeans_restarts);
  read(j, "two_stage_step", c.two_stage_step);
  read(j, "threads", c.threads);
  validate(c);
  return c;
}

json to_json(const Config& c) {
  return json{{"scale", c.scale},
              {"eig_count", c.eig_count},
              {"beta", c.beta},
              {"alpha", c.alpha},
              {"tk",
               {{"window_radius", c.tk.window_radius},
                {"patch_half", c.tk.patch_half},
                {"top_k", c.tk.top_k},
                {"reject_thresh", c.tk.reject_thresh}}},
              {"pairwise", {{"sim_thresh", c.pairwise.sim_thresh}, {"dilation", c.pairwise.dilation}}},
              {"n_points", c.n_points},
              {"lr", c.lr},
              {"momentum", c.momentum},
              {"steps", c.steps},
              {"seed", c.seed},
              {"tel_on", c.tel_on},
              {"qcc_on", c.qcc_on},
              {"tk_on", c.tk_on},
              {"channels", c.channels},
              {"grid_stride", c.grid_stride},
              {"init_sigma", c.init_sigma},
              {"kmeans_restarts", c.kmeans_restarts},
              {"two_stage_step", c.two_stage_step},
              {"threads", c.threads}};
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadConfig, path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace ecvis
