#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <json.hpp>

#include "progd/scenario.hpp"

namespace progd {

struct Toggles {
  bool temporal_module = true;
  bool dyn_aa_edges = true;
  bool dyn_al_edges = true;
  bool multiscale = true;
  bool static_future_graph = false;
};

/// Architecture hyperparameters. Paper-scale values are d=256 over 90 epochs;
/// the defaults here are desk-scale.
struct ModelConfig {
  std::size_t d = 32;
  std::size_t k_modalities = 6;
  double tau_s = 1.0;
  double epsilon_m = 15.0;
  double seed_radius_m = 20.0;
  int dfs_depth = 4;
  std::size_t heads = 8;
  Horizon horizon;
  Toggles toggles;

  int fut_steps() const { return horizon.fut_steps(); }
  int obs_steps() const { return horizon.obs_steps(); }
  /// Snapshot count P with T_f = tau * P.
  int stages() const;
  /// Future steps covered by one snapshot.
  int stage_steps() const;
  /// 2 layers for observation windows up to 1 s, 4 beyond.
  std::size_t agent_tf_layers() const { return horizon.t_obs_s <= 1.0 ? 2 : 4; }

  void validate() const;  // tau must divide T_f on the step grid, K >= 1, ...
};

struct TrainConfig {
  ModelConfig model;
  double lr = 1e-3;
  std::size_t batch_size = 8;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double prob_loss_weight = 0.5;
  double smooth_l1_beta = 1.0;
  double miss_lat_m = 1.0;
  double miss_lon_m = 2.0;
  double actor_miss_m = 2.0;
  NormalizeConvention convention = NormalizeConvention::kCentroidNearest;

  void validate() const;
};

/// Flat key=value config file ('#' starts a comment). Unknown keys are
/// rejected with the offending name.
TrainConfig parse_config_file(const std::string& path);
TrainConfig parse_config_text(const std::string& text);
nlohmann::json config_to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const nlohmann::json& j);

}  // namespace progd
