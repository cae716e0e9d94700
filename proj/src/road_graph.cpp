#include "progd/road_graph.hpp"

#include <algorithm>
#include <cmath>

#include "progd/errors.hpp"

namespace progd {

std::size_t RoadGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& adj : point_adjacency) n += adj.size();
  return n / 2;
}

RoadGraph build_road_graph(const std::vector<LanePolyline>& lanes) {
  RoadGraph g;
  for (const LanePolyline& l : lanes) g.lane_ids.push_back(l.lane_id);
  std::sort(g.lane_ids.begin(), g.lane_ids.end());
  for (std::size_t i = 0; i < g.lane_ids.size(); ++i) g.lane_index[g.lane_ids[i]] = i;

  std::vector<const LanePolyline*> ordered(g.lane_ids.size(), nullptr);
  for (const LanePolyline& l : lanes) ordered[g.lane_index.at(l.lane_id)] = &l;

  g.lane_points.resize(ordered.size());
  g.lane_successors.resize(ordered.size());
  g.lane_predecessors.resize(ordered.size());
  g.lane_adjacency.resize(ordered.size());
  for (std::size_t li = 0; li < ordered.size(); ++li) {
    const LanePolyline& l = *ordered[li];
    for (std::size_t pi = 0; pi < l.centerline.size(); ++pi) {
      g.lane_points[li].push_back(g.points.size());
      g.points.push_back({li, pi, l.centerline[pi]});
    }
    g.lane_centers.push_back(l.center());
  }
  g.point_adjacency.resize(g.points.size());
  auto link_points = [&g](std::size_t a, std::size_t b) {
    g.point_adjacency[a].push_back(b);
    g.point_adjacency[b].push_back(a);
  };
  for (const auto& pts : g.lane_points)
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) link_points(pts[i], pts[i + 1]);

  auto link_lanes = [&g](std::size_t a, std::size_t b) {
    g.lane_successors[a].push_back(b);
    g.lane_predecessors[b].push_back(a);
    g.lane_adjacency[a].push_back(b);
    g.lane_adjacency[b].push_back(a);
    // junction edge: last point of a to first point of b
    const std::size_t pa = g.lane_points[a].back();
    const std::size_t pb = g.lane_points[b].front();
    g.point_adjacency[pa].push_back(pb);
    g.point_adjacency[pb].push_back(pa);
  };
  for (std::size_t li = 0; li < ordered.size(); ++li)
    for (const std::string& succ : ordered[li]->successors) {
      auto it = g.lane_index.find(succ);
      if (it == g.lane_index.end())
        throw ValidationError("lane '" + ordered[li]->lane_id +
                              "' references unknown successor '" + succ + "'");
      link_lanes(li, it->second);
    }
  // Predecessor declarations that were not already implied by a successor.
  for (std::size_t li = 0; li < ordered.size(); ++li)
    for (const std::string& pred : ordered[li]->predecessors) {
      auto it = g.lane_index.find(pred);
      if (it == g.lane_index.end())
        throw ValidationError("lane '" + ordered[li]->lane_id +
                              "' references unknown predecessor '" + pred + "'");
      const std::size_t pi = it->second;
      if (std::find(g.lane_successors[pi].begin(), g.lane_successors[pi].end(), li) ==
          g.lane_successors[pi].end())
        link_lanes(pi, li);
    }
  auto dedupe = [](std::vector<std::vector<std::size_t>>& adj) {
    for (auto& v : adj) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
  };
  dedupe(g.point_adjacency);
  dedupe(g.lane_adjacency);
  dedupe(g.lane_successors);
  dedupe(g.lane_predecessors);
  return g;
}

RoadGcnParams make_road_gcn(ParamStore& ps, const std::string& name, std::size_t d,
                            std::size_t point_layers, std::size_t lane_layers) {
  RoadGcnParams p;
  p.point_embed = make_mlp2(ps, name + ".embed", 4, d, d);
  for (std::size_t i = 0; i < point_layers; ++i)
    p.point_layers.push_back(make_graph_attention(ps, name + ".pt" + std::to_string(i), d));
  for (std::size_t i = 0; i < lane_layers; ++i)
    p.lane_layers.push_back(make_graph_attention(ps, name + ".ln" + std::to_string(i), d));
  return p;
}

std::vector<Tensor> road_gcn_forward(Tape& tape, const RoadGcnParams& params,
                                     const RoadGraph& g) {
  if (g.points.empty()) throw ValidationError("road_gcn_forward on an empty graph");
  // point features: position plus the direction toward the next point
  std::vector<Tensor> feats;
  feats.reserve(g.points.size());
  for (std::size_t li = 0; li < g.lane_points.size(); ++li) {
    const auto& pts = g.lane_points[li];
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const Point2 cur = g.points[pts[k]].pos;
      Point2 ref = cur;
      if (k + 1 < pts.size()) ref = g.points[pts[k + 1]].pos;
      else if (k > 0) {
        const Point2 prev = g.points[pts[k - 1]].pos;
        ref = {2 * cur[0] - prev[0], 2 * cur[1] - prev[1]};
      }
      Tensor f = Tensor::of({4}, {cur[0], cur[1], ref[0] - cur[0], ref[1] - cur[1]});
      feats.push_back(mlp2(tape, f, params.point_embed));
    }
  }
  // feats above follow lane_points order, which is the global point order
  for (const GraphAttention& layer : params.point_layers)
    feats = graph_attention(tape, feats, g.point_adjacency, layer);
  const std::vector<Tensor> intermediate = feats;

  // pool points -> polylines (mean)
  std::vector<Tensor> lane_feats;
  lane_feats.reserve(g.lane_points.size());
  for (const auto& pts : g.lane_points) {
    std::vector<Tensor> rows;
    rows.reserve(pts.size());
    for (std::size_t p : pts) rows.push_back(feats[p]);
    lane_feats.push_back(mean_rows(tape, stack_rows(tape, rows)));
  }
  for (const GraphAttention& layer : params.lane_layers)
    lane_feats = graph_attention(tape, lane_feats, g.lane_adjacency, layer);

  // unpool (broadcast) and fuse with the intermediate point features
  std::vector<Tensor> fused(g.points.size());
  for (std::size_t li = 0; li < g.lane_points.size(); ++li)
    for (std::size_t p : g.lane_points[li])
      fused[p] = add(tape, intermediate[p], lane_feats[li]);

  // per-segment embedding: mean over the segment's fused point features
  std::vector<Tensor> out;
  out.reserve(g.lane_points.size());
  for (const auto& pts : g.lane_points) {
    std::vector<Tensor> rows;
    rows.reserve(pts.size());
    for (std::size_t p : pts) rows.push_back(fused[p]);
    out.push_back(mean_rows(tape, stack_rows(tape, rows)));
  }
  return out;
}

std::set<std::string> dfs_candidate_lanes(const Point2& position, const RoadGraph& g,
                                          double seed_radius, int depth) {
  if (depth < 0) throw UsageError("dfs_candidate_lanes: depth must be non-negative");
  std::vector<std::size_t> seeds;
  const double r2 = seed_radius * seed_radius;
  for (std::size_t li = 0; li < g.lane_points.size(); ++li)
    for (std::size_t p : g.lane_points[li]) {
      const double dx = g.points[p].pos[0] - position[0];
      const double dy = g.points[p].pos[1] - position[1];
      if (dx * dx + dy * dy <= r2) {
        seeds.push_back(li);
        break;
      }
    }
  std::set<std::size_t> result;
  // depth-first over successor edges, bounded by remaining hops
  std::vector<std::pair<std::size_t, int>> stack;
  for (std::size_t s : seeds) stack.push_back({s, depth});
  std::map<std::size_t, int> best_budget;
  while (!stack.empty()) {
    auto [lane, budget] = stack.back();
    stack.pop_back();
    auto it = best_budget.find(lane);
    if (it != best_budget.end() && it->second >= budget) continue;
    best_budget[lane] = budget;
    result.insert(lane);
    if (budget == 0) continue;
    for (std::size_t succ : g.lane_successors[lane]) stack.push_back({succ, budget - 1});
  }
  // adjacent merging lanes: seeds' same-junction predecessors' successors
  for (std::size_t s : seeds)
    for (std::size_t pred : g.lane_predecessors[s])
      for (std::size_t sib : g.lane_successors[pred]) result.insert(sib);
  std::set<std::string> ids;
  for (std::size_t li : result) ids.insert(g.lane_ids[li]);
  return ids;
}

}  // namespace progd
