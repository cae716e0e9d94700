#include "progd/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "progd/errors.hpp"

namespace progd {

int ModelConfig::stages() const {
  return static_cast<int>(std::lround(horizon.t_fut_s / tau_s));
}

int ModelConfig::stage_steps() const {
  return static_cast<int>(std::lround(tau_s * horizon.hz));
}

void ModelConfig::validate() const {
  if (k_modalities < 1) throw ValidationError("config: k_modalities must be >= 1");
  if (d == 0) throw ValidationError("config: d must be positive");
  if (tau_s <= 0) throw ValidationError("config: tau_s must be positive");
  const int p = stages();
  if (p < 1 || std::abs(tau_s * p - horizon.t_fut_s) > 1e-9)
    throw ValidationError("config: tau_s=" + std::to_string(tau_s) +
                          " does not divide t_fut_s=" + std::to_string(horizon.t_fut_s));
  const int ss = stage_steps();
  if (ss < 1 || std::abs(tau_s * horizon.hz - ss) > 1e-9)
    throw ValidationError("config: tau_s*hz must be a whole number of steps");
  if (ss * p != fut_steps())
    throw ValidationError("config: stage steps do not tile the prediction horizon");
  if (heads == 0 || d % heads != 0)
    throw ValidationError("config: d must be divisible by heads");
  if (epsilon_m <= 0) throw ValidationError("config: epsilon_m must be positive");
  if (dfs_depth < 0) throw ValidationError("config: dfs_depth must be >= 0");
}

void TrainConfig::validate() const {
  model.validate();
  if (lr < 0) throw ValidationError("config: lr must be >= 0");
  if (batch_size == 0) throw ValidationError("config: batch_size must be positive");
  if (smooth_l1_beta <= 0) throw ValidationError("config: smooth_l1_beta must be positive");
}

namespace {

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValidationError("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

void apply_key(TrainConfig& cfg, const std::string& key, const std::string& value) {
  auto as_double = [&]() {
    try {
      return std::stod(value);
    } catch (...) {
      throw ValidationError("config: key '" + key + "' expects a number, got '" + value + "'");
    }
  };
  auto as_int = [&]() { return static_cast<long long>(std::llround(as_double())); };

  if (key == "d") cfg.model.d = static_cast<std::size_t>(as_int());
  else if (key == "k_modalities") cfg.model.k_modalities = static_cast<std::size_t>(as_int());
  else if (key == "tau_s") cfg.model.tau_s = as_double();
  else if (key == "epsilon_m") cfg.model.epsilon_m = as_double();
  else if (key == "seed_radius_m") cfg.model.seed_radius_m = as_double();
  else if (key == "dfs_depth") cfg.model.dfs_depth = static_cast<int>(as_int());
  else if (key == "heads") cfg.model.heads = static_cast<std::size_t>(as_int());
  else if (key == "t_obs_s") cfg.model.horizon.t_obs_s = as_double();
  else if (key == "t_fut_s") cfg.model.horizon.t_fut_s = as_double();
  else if (key == "hz") cfg.model.horizon.hz = static_cast<int>(as_int());
  else if (key == "temporal_module") cfg.model.toggles.temporal_module = parse_bool(key, value);
  else if (key == "dyn_aa_edges") cfg.model.toggles.dyn_aa_edges = parse_bool(key, value);
  else if (key == "dyn_al_edges") cfg.model.toggles.dyn_al_edges = parse_bool(key, value);
  else if (key == "multiscale") cfg.model.toggles.multiscale = parse_bool(key, value);
  else if (key == "static_future_graph")
    cfg.model.toggles.static_future_graph = parse_bool(key, value);
  else if (key == "lr") cfg.lr = as_double();
  else if (key == "batch_size") cfg.batch_size = static_cast<std::size_t>(as_int());
  else if (key == "epochs") cfg.epochs = static_cast<std::size_t>(as_int());
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(as_int());
  else if (key == "lambda1") cfg.lambda1 = as_double();
  else if (key == "lambda2") cfg.lambda2 = as_double();
  else if (key == "prob_loss_weight") cfg.prob_loss_weight = as_double();
  else if (key == "smooth_l1_beta") cfg.smooth_l1_beta = as_double();
  else if (key == "miss_lat_m") cfg.miss_lat_m = as_double();
  else if (key == "miss_lon_m") cfg.miss_lon_m = as_double();
  else if (key == "actor_miss_m") cfg.actor_miss_m = as_double();
  else if (key == "normalize") {
    if (value == "ego_centric") cfg.convention = NormalizeConvention::kEgoCentric;
    else if (value == "centroid_nearest") cfg.convention = NormalizeConvention::kCentroidNearest;
    else throw ValidationError("config: key 'normalize' expects ego_centric|centroid_nearest");
  } else {
    throw ValidationError("config: unknown key '" + key + "'");
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

TrainConfig parse_config_text(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(line_no) +
                            ": expected key=value, got '" + line + "'");
    apply_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

TrainConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

nlohmann::json config_to_json(const TrainConfig& cfg) {
  nlohmann::json j;
  j["d"] = cfg.model.d;
  j["k_modalities"] = cfg.model.k_modalities;
  j["tau_s"] = cfg.model.tau_s;
  j["epsilon_m"] = cfg.model.epsilon_m;
  j["seed_radius_m"] = cfg.model.seed_radius_m;
  j["dfs_depth"] = cfg.model.dfs_depth;
  j["heads"] = cfg.model.heads;
  j["t_obs_s"] = cfg.model.horizon.t_obs_s;
  j["t_fut_s"] = cfg.model.horizon.t_fut_s;
  j["hz"] = cfg.model.horizon.hz;
  j["temporal_module"] = cfg.model.toggles.temporal_module;
  j["dyn_aa_edges"] = cfg.model.toggles.dyn_aa_edges;
  j["dyn_al_edges"] = cfg.model.toggles.dyn_al_edges;
  j["multiscale"] = cfg.model.toggles.multiscale;
  j["static_future_graph"] = cfg.model.toggles.static_future_graph;
  j["lr"] = cfg.lr;
  j["batch_size"] = cfg.batch_size;
  j["epochs"] = cfg.epochs;
  j["seed"] = cfg.seed;
  j["lambda1"] = cfg.lambda1;
  j["lambda2"] = cfg.lambda2;
  j["prob_loss_weight"] = cfg.prob_loss_weight;
  j["smooth_l1_beta"] = cfg.smooth_l1_beta;
  j["miss_lat_m"] = cfg.miss_lat_m;
  j["miss_lon_m"] = cfg.miss_lon_m;
  j["actor_miss_m"] = cfg.actor_miss_m;
  j["normalize"] =
      cfg.convention == NormalizeConvention::kEgoCentric ? "ego_centric" : "centroid_nearest";
  return j;
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  for (auto it = j.begin(); it != j.end(); ++it) {
    std::string value;
    if (it->is_boolean()) value = it->get<bool>() ? "true" : "false";
    else if (it->is_string()) value = it->get<std::string>();
    else {
      std::ostringstream os;
      os.precision(17);
      os << it->get<double>();
      value = os.str();
    }
    apply_key(cfg, it.key(), value);
  }
  cfg.validate();
  return cfg;
}

}  // namespace progd
