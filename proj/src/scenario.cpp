#include "progd/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "progd/errors.hpp"

namespace progd {

using nlohmann::json;

const char* to_string(AgentType type) {
  switch (type) {
    case AgentType::kCar: return "car";
    case AgentType::kPedestrian: return "pedestrian";
    case AgentType::kBicycle: return "bicycle";
    case AgentType::kOther: return "other";
  }
  return "other";
}

AgentType agent_type_from_string(const std::string& s) {
  if (s == "car") return AgentType::kCar;
  if (s == "pedestrian") return AgentType::kPedestrian;
  if (s == "bicycle") return AgentType::kBicycle;
  if (s == "other") return AgentType::kOther;
  throw ValidationError("unknown agent type '" + s + "'");
}

double wrap_angle(double a) {
  const double two_pi = 2.0 * M_PI;
  a = std::fmod(a, two_pi);
  if (a <= -M_PI) a += two_pi;
  if (a > M_PI) a -= two_pi;
  return a;
}

const AgentState* AgentTrack::state_at(int t) const {
  for (const AgentState& s : states)
    if (s.t == t) return &s;
  return nullptr;
}

bool AgentTrack::has_range(int t_first, int t_last) const {
  for (int t = t_first; t <= t_last; ++t)
    if (!state_at(t)) return false;
  return true;
}

Point2 LanePolyline::center() const {
  Point2 c{0, 0};
  for (const Point2& p : centerline) {
    c[0] += p[0];
    c[1] += p[1];
  }
  const double n = static_cast<double>(centerline.size());
  return {c[0] / n, c[1] / n};
}

const AgentTrack* Scenario::track(const std::string& id) const {
  for (const AgentTrack& t : tracks)
    if (t.agent_id == id) return &t;
  return nullptr;
}

const LanePolyline* Scenario::lane(const std::string& id) const {
  for (const LanePolyline& l : lanes)
    if (l.lane_id == id) return &l;
  return nullptr;
}

std::vector<std::string> Scenario::sorted_interesting() const {
  std::vector<std::string> ids = interesting_ids;
  std::sort(ids.begin(), ids.end());
  return ids;
}

void Scenario::validate() const {
  if (interesting_ids.empty())
    throw ValidationError("scenario '" + scenario_id + "': interesting_ids is empty");
  if (!track(ego_id))
    throw ValidationError("scenario '" + scenario_id + "': ego_id '" + ego_id +
                          "' has no track");
  std::set<std::string> ids;
  for (const AgentTrack& t : tracks) {
    if (!ids.insert(t.agent_id).second)
      throw ValidationError("scenario '" + scenario_id + "': duplicate agent_id '" +
                            t.agent_id + "'");
    for (std::size_t i = 0; i + 1 < t.states.size(); ++i)
      if (t.states[i].t >= t.states[i + 1].t)
        throw ValidationError("scenario '" + scenario_id + "': agent '" + t.agent_id +
                              "' timesteps not strictly increasing");
    for (const AgentState& s : t.states) {
      if (s.length <= 0 || s.width <= 0)
        throw ValidationError("scenario '" + scenario_id + "': agent '" + t.agent_id +
                              "' has non-positive shape");
      if (!(s.yaw > -M_PI - 1e-12 && s.yaw <= M_PI + 1e-12))
        throw ValidationError("scenario '" + scenario_id + "': agent '" + t.agent_id +
                              "' yaw outside (-pi, pi]");
    }
  }
  for (const std::string& id : interesting_ids) {
    const AgentTrack* t = track(id);
    if (!t)
      throw ValidationError("scenario '" + scenario_id + "': interesting agent '" + id +
                            "' has no track");
    if (!t->state_at(0))
      throw ValidationError("scenario '" + scenario_id + "': interesting agent '" + id +
                            "' is missing the t=0 state");
  }
  std::set<std::string> lane_ids;
  for (const LanePolyline& l : lanes) {
    if (!lane_ids.insert(l.lane_id).second)
      throw ValidationError("scenario '" + scenario_id + "': duplicate lane_id '" +
                            l.lane_id + "'");
    if (l.centerline.size() < 2)
      throw ValidationError("scenario '" + scenario_id + "': lane '" + l.lane_id +
                            "' has fewer than 2 centerline points");
  }
  for (const LanePolyline& l : lanes) {
    for (const std::string& s : l.successors)
      if (!lane_ids.count(s))
        throw ValidationError("scenario '" + scenario_id + "': lane '" + l.lane_id +
                              "' references unknown successor '" + s + "'");
    for (const std::string& p : l.predecessors)
      if (!lane_ids.count(p))
        throw ValidationError("scenario '" + scenario_id + "': lane '" + l.lane_id +
                              "' references unknown predecessor '" + p + "'");
  }
}

void Scenario::validate_for_training() const {
  validate();
  const int fut = horizon.fut_steps();
  for (const std::string& id : interesting_ids) {
    const AgentTrack* t = track(id);
    if (!t->has_range(1, fut))
      throw ValidationError("scenario '" + scenario_id + "': interesting agent '" + id +
                            "' lacks the full ground-truth future");
  }
}

namespace {

Point2 rotate(const Point2& p, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * p[0] - s * p[1], c * p[1] + s * p[0]};
}

void transform_scenario(Scenario& s, const Point2& anchor, double heading) {
  // p' = R(-heading) (p - anchor)
  for (AgentTrack& t : s.tracks)
    for (AgentState& st : t.states) {
      const Point2 p = rotate({st.x - anchor[0], st.y - anchor[1]}, -heading);
      const Point2 v = rotate({st.vx, st.vy}, -heading);
      st.x = p[0];
      st.y = p[1];
      st.vx = v[0];
      st.vy = v[1];
      st.yaw = wrap_angle(st.yaw - heading);
    }
  for (LanePolyline& l : s.lanes)
    for (Point2& p : l.centerline) p = rotate({p[0] - anchor[0], p[1] - anchor[1]}, -heading);
}

const AgentTrack& pick_anchor(const Scenario& s, NormalizeConvention convention) {
  if (convention == NormalizeConvention::kEgoCentric) {
    const AgentTrack* ego = s.track(s.ego_id);
    if (!ego) throw ValidationError("normalize: ego track '" + s.ego_id + "' missing");
    if (!ego->state_at(0))
      throw ValidationError("normalize: ego '" + s.ego_id + "' has no t=0 state");
    return *ego;
  }
  // Centroid of all agents with a t=0 state, accumulated in id-sorted order so
  // the result is independent of track ordering.
  std::vector<const AgentTrack*> with_t0;
  for (const AgentTrack& t : s.tracks)
    if (t.state_at(0)) with_t0.push_back(&t);
  if (with_t0.empty()) throw ValidationError("normalize: no agent has a t=0 state");
  std::sort(with_t0.begin(), with_t0.end(),
            [](const AgentTrack* a, const AgentTrack* b) { return a->agent_id < b->agent_id; });
  Point2 centroid{0, 0};
  for (const AgentTrack* t : with_t0) {
    const AgentState* st = t->state_at(0);
    centroid[0] += st->x;
    centroid[1] += st->y;
  }
  centroid[0] /= static_cast<double>(with_t0.size());
  centroid[1] /= static_cast<double>(with_t0.size());
  const AgentTrack* best = with_t0[0];
  double best_d2 = std::numeric_limits<double>::infinity();
  for (const AgentTrack* t : with_t0) {
    const AgentState* st = t->state_at(0);
    const double dx = st->x - centroid[0], dy = st->y - centroid[1];
    const double d2 = dx * dx + dy * dy;
    if (d2 < best_d2) {  // strict: ties keep the lexicographically smallest id
      best_d2 = d2;
      best = t;
    }
  }
  return *best;
}

}  // namespace

Scenario normalize(const Scenario& raw, NormalizeConvention convention) {
  const AgentTrack& anchor = pick_anchor(raw, convention);
  const AgentState* st = anchor.state_at(0);
  if (!st)
    throw ValidationError("normalize: anchor '" + anchor.agent_id + "' has no t=0 state");
  const Point2 a{st->x, st->y};
  const double heading = st->yaw;
  Scenario out = raw;
  transform_scenario(out, a, heading);
  // compose: new frame maps the normalized coordinates back to raw's target
  const Point2 a_global = rotate(a, raw.frame.rotation);
  out.frame.origin = {raw.frame.origin[0] + a_global[0], raw.frame.origin[1] + a_global[1]};
  out.frame.rotation = raw.frame.rotation + heading;
  return out;
}

Scenario denormalize(const Scenario& s) {
  Scenario out = s;
  const Point2 o = s.frame.origin;
  const double rot = s.frame.rotation;
  for (AgentTrack& t : out.tracks)
    for (AgentState& st : t.states) {
      const Point2 p = rotate({st.x, st.y}, rot);
      const Point2 v = rotate({st.vx, st.vy}, rot);
      st.x = p[0] + o[0];
      st.y = p[1] + o[1];
      st.vx = v[0];
      st.vy = v[1];
      st.yaw = wrap_angle(st.yaw + rot);
    }
  for (LanePolyline& l : out.lanes)
    for (Point2& p : l.centerline) {
      const Point2 q = rotate(p, rot);
      p = {q[0] + o[0], q[1] + o[1]};
    }
  out.frame = Frame{};
  return out;
}

namespace {

const json& require_field(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw ValidationError("line " + std::to_string(line) + ": missing field '" + key + "'");
  return *it;
}

json scenario_to_json(const Scenario& s) {
  json j;
  j["scenario_id"] = s.scenario_id;
  j["horizon"] = {{"t_obs_s", s.horizon.t_obs_s}, {"t_fut_s", s.horizon.t_fut_s}, {"hz", s.horizon.hz}};
  j["frame"] = {{"origin", {s.frame.origin[0], s.frame.origin[1]}}, {"rot", s.frame.rotation}};
  j["ego_id"] = s.ego_id;
  j["interesting_ids"] = s.interesting_ids;
  json tracks = json::array();
  for (const AgentTrack& t : s.tracks) {
    json states = json::array();
    for (const AgentState& st : t.states)
      states.push_back({st.t, st.x, st.y, st.vx, st.vy, st.yaw, st.length, st.width});
    tracks.push_back({{"agent_id", t.agent_id}, {"type", to_string(t.type)}, {"states", states}});
  }
  j["tracks"] = tracks;
  json lanes = json::array();
  for (const LanePolyline& l : s.lanes) {
    json pts = json::array();
    for (const Point2& p : l.centerline) pts.push_back({p[0], p[1]});
    lanes.push_back({{"lane_id", l.lane_id},
                     {"centerline", pts},
                     {"succ", l.successors},
                     {"pred", l.predecessors}});
  }
  j["lanes"] = lanes;
  return j;
}

Scenario scenario_from_json(const json& j, std::size_t line) {
  Scenario s;
  s.scenario_id = require_field(j, "scenario_id", line).get<std::string>();
  const json& h = require_field(j, "horizon", line);
  s.horizon.t_obs_s = require_field(h, "t_obs_s", line).get<double>();
  s.horizon.t_fut_s = require_field(h, "t_fut_s", line).get<double>();
  s.horizon.hz = require_field(h, "hz", line).get<int>();
  const json& f = require_field(j, "frame", line);
  const auto origin = require_field(f, "origin", line).get<std::vector<double>>();
  if (origin.size() != 2)
    throw ValidationError("line " + std::to_string(line) + ": field 'frame.origin' must have 2 entries");
  s.frame.origin = {origin[0], origin[1]};
  s.frame.rotation = require_field(f, "rot", line).get<double>();
  s.ego_id = require_field(j, "ego_id", line).get<std::string>();
  s.interesting_ids = require_field(j, "interesting_ids", line).get<std::vector<std::string>>();
  for (const json& tj : require_field(j, "tracks", line)) {
    AgentTrack t;
    t.agent_id = require_field(tj, "agent_id", line).get<std::string>();
    t.type = agent_type_from_string(require_field(tj, "type", line).get<std::string>());
    for (const json& sj : require_field(tj, "states", line)) {
      if (!sj.is_array() || sj.size() != 8)
        throw ValidationError("line " + std::to_string(line) + ": field 'states' entry must be [t,x,y,vx,vy,yaw,len,wid]");
      AgentState st;
      st.t = sj[0].get<int>();
      st.x = sj[1].get<double>();
      st.y = sj[2].get<double>();
      st.vx = sj[3].get<double>();
      st.vy = sj[4].get<double>();
      st.yaw = sj[5].get<double>();
      st.length = sj[6].get<double>();
      st.width = sj[7].get<double>();
      t.states.push_back(st);
    }
    s.tracks.push_back(std::move(t));
  }
  for (const json& lj : require_field(j, "lanes", line)) {
    LanePolyline l;
    l.lane_id = require_field(lj, "lane_id", line).get<std::string>();
    for (const json& pj : require_field(lj, "centerline", line)) {
      if (!pj.is_array() || pj.size() != 2)
        throw ValidationError("line " + std::to_string(line) + ": field 'centerline' entry must be [x,y]");
      l.centerline.push_back({pj[0].get<double>(), pj[1].get<double>()});
    }
    l.successors = require_field(lj, "succ", line).get<std::vector<std::string>>();
    l.predecessors = require_field(lj, "pred", line).get<std::vector<std::string>>();
    s.lanes.push_back(std::move(l));
  }
  return s;
}

}  // namespace

std::vector<Scenario> load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "' for reading");
  std::vector<Scenario> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": malformed JSON (" +
                            e.what() + ")");
    }
    try {
      Scenario s = scenario_from_json(j, line_no);
      s.validate();
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": bad field type (" +
                            e.what() + ")");
    }
  }
  if (in.bad()) throw ValidationError("I/O error while reading '" + path + "'");
  return out;
}

void save_jsonl(const std::vector<Scenario>& scenarios, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  for (const Scenario& s : scenarios) out << scenario_to_json(s).dump() << "\n";
  if (!out) throw ValidationError("I/O error while writing '" + path + "'");
}

}  // namespace progd
