#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "progd/errors.hpp"
#include "progd/rng.hpp"
#include "progd/scenario.hpp"

using namespace progd;

namespace {

AgentState make_state(int t, double x, double y, double vx = 1, double vy = 0,
                      double yaw = 0) {
  AgentState s;
  s.t = t;
  s.x = x;
  s.y = y;
  s.vx = vx;
  s.vy = vy;
  s.yaw = yaw;
  return s;
}

Scenario tiny_scenario() {
  Scenario s;
  s.scenario_id = "tiny";
  s.ego_id = "a0";
  s.interesting_ids = {"a0", "a1"};
  AgentTrack t0{"a0", AgentType::kCar, {}};
  AgentTrack t1{"a1", AgentType::kCar, {}};
  for (int t = -9; t <= 30; ++t) {
    t0.states.push_back(make_state(t, 0.1 * t, 0.0));
    t1.states.push_back(make_state(t, 0.1 * t + 5.0, 2.0));
  }
  s.tracks = {t0, t1};
  LanePolyline lane;
  lane.lane_id = "l0";
  lane.centerline = {{-10, 0}, {0, 0}, {10, 0}, {20, 0}};
  s.lanes = {lane};
  return s;
}

Scenario random_scenario(Rng& rng, const std::string& id) {
  Scenario s = tiny_scenario();
  s.scenario_id = id;
  for (AgentTrack& t : s.tracks)
    for (AgentState& st : t.states) {
      st.x += rng.uniform(-1, 1);
      st.y += rng.uniform(-1, 1);
      st.yaw = wrap_angle(rng.uniform(-3.14, 3.14));
      st.vx = rng.uniform(-5, 5);
      st.vy = rng.uniform(-5, 5);
    }
  return s;
}

double max_coord_delta(const Scenario& a, const Scenario& b) {
  double m = 0;
  for (std::size_t ti = 0; ti < a.tracks.size(); ++ti)
    for (std::size_t si = 0; si < a.tracks[ti].states.size(); ++si) {
      const AgentState& x = a.tracks[ti].states[si];
      const AgentState& y = b.tracks[ti].states[si];
      m = std::max({m, std::abs(x.x - y.x), std::abs(x.y - y.y), std::abs(x.vx - y.vx),
                    std::abs(x.vy - y.vy)});
    }
  for (std::size_t li = 0; li < a.lanes.size(); ++li)
    for (std::size_t pi = 0; pi < a.lanes[li].centerline.size(); ++pi) {
      m = std::max(m, std::abs(a.lanes[li].centerline[pi][0] - b.lanes[li].centerline[pi][0]));
      m = std::max(m, std::abs(a.lanes[li].centerline[pi][1] - b.lanes[li].centerline[pi][1]));
    }
  return m;
}

}  // namespace

TEST_CASE("normalize puts the anchor at the origin heading +x") {
  Scenario s = tiny_scenario();
  AgentState& st = s.tracks[0].states[9];  // t = 0
  REQUIRE(st.t == 0);
  st.x = 5;
  st.y = 5;
  st.yaw = M_PI / 2;
  Scenario n = normalize(s, NormalizeConvention::kEgoCentric);
  const AgentState* a = n.track("a0")->state_at(0);
  CHECK(a->x == doctest::Approx(0.0));
  CHECK(a->y == doctest::Approx(0.0));
  CHECK(a->yaw == doctest::Approx(0.0));
}

TEST_CASE("normalize then denormalize round-trips to 1e-9") {
  Rng rng(5);
  for (int i = 0; i < 5; ++i) {
    Scenario s = random_scenario(rng, "rt" + std::to_string(i));
    Scenario back = denormalize(normalize(s, NormalizeConvention::kCentroidNearest));
    CHECK(max_coord_delta(s, back) <= 1e-9);
  }
}

TEST_CASE("denormalize with identity frame is a no-op, translation subtracts") {
  Scenario s = tiny_scenario();
  Scenario d = denormalize(s);
  CHECK(max_coord_delta(s, d) == 0.0);

  Scenario t = tiny_scenario();
  t.frame.origin = {3.0, -2.0};
  Scenario dt = denormalize(t);
  CHECK(dt.track("a0")->state_at(0)->x ==
        doctest::Approx(t.track("a0")->state_at(0)->x + 3.0));
  CHECK(dt.track("a0")->state_at(0)->y ==
        doctest::Approx(t.track("a0")->state_at(0)->y - 2.0));
}

TEST_CASE("centroid_nearest picks the middle of three collinear agents") {
  Scenario s = tiny_scenario();
  s.interesting_ids = {"a0", "a1", "a2"};
  s.tracks.clear();
  const double xs[3] = {0, 10, 20};
  for (int i = 0; i < 3; ++i) {
    AgentTrack t{"a" + std::to_string(i), AgentType::kCar, {}};
    for (int step = -9; step <= 30; ++step) t.states.push_back(make_state(step, xs[i], 0));
    s.tracks.push_back(t);
  }
  // brute-force oracle: distances to the centroid (10, 0)
  int best = 0;
  double best_d = 1e18;
  for (int i = 0; i < 3; ++i) {
    const double d = std::abs(xs[i] - 10.0);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  CHECK(best == 1);
  Scenario n = normalize(s, NormalizeConvention::kCentroidNearest);
  CHECK(n.track("a1")->state_at(0)->x == doctest::Approx(0.0));
  CHECK(n.track("a0")->state_at(0)->x == doctest::Approx(-10.0));
}

TEST_CASE("normalize preserves pairwise distances") {
  Rng rng(6);
  Scenario s = random_scenario(rng, "dist");
  Scenario n = normalize(s, NormalizeConvention::kEgoCentric);
  const AgentState* a0 = s.track("a0")->state_at(0);
  const AgentState* a1 = s.track("a1")->state_at(0);
  const AgentState* b0 = n.track("a0")->state_at(0);
  const AgentState* b1 = n.track("a1")->state_at(0);
  const double before = std::hypot(a0->x - a1->x, a0->y - a1->y);
  const double after = std::hypot(b0->x - b1->x, b0->y - b1->y);
  CHECK(std::abs(before - after) <= 1e-9);
}

TEST_CASE("normalize requires the anchor's t=0 state") {
  Scenario s = tiny_scenario();
  auto& states = s.tracks[0].states;
  states.erase(std::remove_if(states.begin(), states.end(),
                              [](const AgentState& st) { return st.t == 0; }),
               states.end());
  CHECK_THROWS_AS(normalize(s, NormalizeConvention::kEgoCentric), ValidationError);
}

TEST_CASE("jsonl round-trip preserves every field") {
  Rng rng(7);
  std::vector<Scenario> scenarios;
  for (int i = 0; i < 10; ++i) scenarios.push_back(random_scenario(rng, "s" + std::to_string(i)));
  const std::string path = (std::filesystem::temp_directory_path() / "progd_rt.jsonl").string();
  save_jsonl(scenarios, path);
  auto loaded = load_jsonl(path);
  REQUIRE(loaded.size() == scenarios.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].scenario_id == scenarios[i].scenario_id);
    CHECK(loaded[i].ego_id == scenarios[i].ego_id);
    CHECK(loaded[i].interesting_ids == scenarios[i].interesting_ids);
    CHECK(loaded[i].horizon.hz == scenarios[i].horizon.hz);
    CHECK(max_coord_delta(loaded[i], scenarios[i]) == 0.0);
    for (std::size_t ti = 0; ti < loaded[i].tracks.size(); ++ti) {
      CHECK(loaded[i].tracks[ti].agent_id == scenarios[i].tracks[ti].agent_id);
      CHECK(loaded[i].tracks[ti].type == scenarios[i].tracks[ti].type);
      for (std::size_t si = 0; si < loaded[i].tracks[ti].states.size(); ++si) {
        CHECK(loaded[i].tracks[ti].states[si].t == scenarios[i].tracks[ti].states[si].t);
        CHECK(loaded[i].tracks[ti].states[si].yaw == scenarios[i].tracks[ti].states[si].yaw);
      }
    }
  }
  std::remove(path.c_str());
}

TEST_CASE("jsonl load reports the offending line and field") {
  const std::string path = (std::filesystem::temp_directory_path() / "progd_bad.jsonl").string();
  {
    Scenario ok = tiny_scenario();
    save_jsonl({ok}, path);
    std::ofstream app(path, std::ios::app);
    app << R"({"scenario_id":"x","horizon":{"t_obs_s":1,"t_fut_s":3,"hz":10},)"
        << R"("frame":{"origin":[0,0],"rot":0},"ego_id":"a0","tracks":[],"lanes":[]})"
        << "\n";
  }
  bool threw = false;
  try {
    load_jsonl(path);
  } catch (const ValidationError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    CHECK(std::string(e.what()).find("interesting_ids") != std::string::npos);
  }
  CHECK(threw);
  std::remove(path.c_str());
}

TEST_CASE("truncated jsonl fails without partial success") {
  const std::string path = (std::filesystem::temp_directory_path() / "progd_trunc.jsonl").string();
  {
    Scenario ok = tiny_scenario();
    save_jsonl({ok}, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    in.close();
    std::ofstream out(path);
    out << line << "\n" << line.substr(0, line.size() / 2);  // cut mid-record
  }
  CHECK_THROWS_AS(load_jsonl(path), ValidationError);
  std::remove(path.c_str());
}

TEST_CASE("validation rejects structural violations") {
  Scenario s = tiny_scenario();
  s.interesting_ids.clear();
  CHECK_THROWS_AS(s.validate(), ValidationError);

  Scenario s2 = tiny_scenario();
  s2.ego_id = "ghost";
  CHECK_THROWS_AS(s2.validate(), ValidationError);

  Scenario s3 = tiny_scenario();
  s3.lanes[0].successors.push_back("nope");
  CHECK_THROWS_AS(s3.validate(), ValidationError);

  Scenario s4 = tiny_scenario();
  s4.tracks[1].states.resize(5);  // a1 loses its future and t=0
  CHECK_THROWS_AS(s4.validate(), ValidationError);
}
