#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace progd {

using Point2 = std::array<double, 2>;

enum class AgentType { kCar, kPedestrian, kBicycle, kOther };
const char* to_string(AgentType type);
AgentType agent_type_from_string(const std::string& s);

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

struct AgentState {
  int t = 0;  // timestep index on the fixed-frequency grid
  double x = 0, y = 0;
  double vx = 0, vy = 0;
  double yaw = 0;
  double length = 4.5, width = 1.8;
};

struct AgentTrack {
  std::string agent_id;
  AgentType type = AgentType::kCar;
  std::vector<AgentState> states;  // strictly increasing t

  const AgentState* state_at(int t) const;
  bool has_range(int t_first, int t_last) const;  // inclusive, every step present
};

struct LanePolyline {
  std::string lane_id;
  std::vector<Point2> centerline;
  std::vector<std::string> successors;
  std::vector<std::string> predecessors;

  Point2 center() const;  // arithmetic mean of the centerline points
};

struct Frame {
  Point2 origin{0.0, 0.0};
  double rotation = 0.0;
  bool identity() const { return origin[0] == 0.0 && origin[1] == 0.0 && rotation == 0.0; }
};

struct Horizon {
  double t_obs_s = 1.0;
  double t_fut_s = 3.0;
  int hz = 10;
  int obs_steps() const { return static_cast<int>(std::lround(t_obs_s * hz)); }
  int fut_steps() const { return static_cast<int>(std::lround(t_fut_s * hz)); }
};

struct Scenario {
  std::string scenario_id;
  Horizon horizon;
  Frame frame;  // transform from current coordinates back to the raw global frame
  std::string ego_id;
  std::vector<std::string> interesting_ids;
  std::vector<AgentTrack> tracks;
  std::vector<LanePolyline> lanes;

  const AgentTrack* track(const std::string& id) const;
  const LanePolyline* lane(const std::string& id) const;
  /// Interesting ids in lexicographic order; the canonical agent order used
  /// by the decoder, losses, and metrics.
  std::vector<std::string> sorted_interesting() const;

  void validate() const;
  /// validate() plus full ground-truth futures for every interesting agent.
  void validate_for_training() const;
};

enum class NormalizeConvention { kEgoCentric, kCentroidNearest };

/// Rigidly transforms the scenario so the anchor agent sits at the origin with
/// heading +x at t=0. The frame keeps the composed inverse transform.
Scenario normalize(const Scenario& raw, NormalizeConvention convention);
/// Exact inverse: applies the stored frame and resets it to identity.
Scenario denormalize(const Scenario& s);

std::vector<Scenario> load_jsonl(const std::string& path);
void save_jsonl(const std::vector<Scenario>& scenarios, const std::string& path);

}  // namespace progd
