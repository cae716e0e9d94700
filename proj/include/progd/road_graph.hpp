#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "progd/nn.hpp"
#include "progd/scenario.hpp"
#include "progd/tensor.hpp"

namespace progd {

/// Point-level lane graph plus the polyline-level topology derived from it.
/// Lanes are kept in lexicographic id order so every downstream computation
/// is independent of the insertion order of the input polylines.
struct RoadGraph {
  struct PointNode {
    std::size_t lane = 0;   // index into lane_ids
    std::size_t offset = 0; // position within the parent polyline
    Point2 pos{0, 0};
  };

  std::vector<std::string> lane_ids;  // sorted
  std::map<std::string, std::size_t> lane_index;
  std::vector<PointNode> points;
  std::vector<std::vector<std::size_t>> point_adjacency;  // symmetric, sorted
  std::vector<std::vector<std::size_t>> lane_points;      // polyline -> points
  std::vector<std::vector<std::size_t>> lane_adjacency;   // symmetric, from succ/pred
  std::vector<std::vector<std::size_t>> lane_successors;  // directed
  std::vector<std::vector<std::size_t>> lane_predecessors;
  std::vector<Point2> lane_centers;

  std::size_t edge_count() const;  // undirected point edges
};

RoadGraph build_road_graph(const std::vector<LanePolyline>& lanes);

/// Parameters of the multi-scale road encoder: point-level attention layers,
/// mean pooling to polylines, polyline-level attention layers, broadcast
/// unpooling fused back into the point features by addition.
struct RoadGcnParams {
  Mlp2 point_embed;  // [x, y, dx, dy] -> d
  std::vector<GraphAttention> point_layers;
  std::vector<GraphAttention> lane_layers;
};

RoadGcnParams make_road_gcn(ParamStore& ps, const std::string& name, std::size_t d,
                            std::size_t point_layers, std::size_t lane_layers);

/// Per-lane-segment embeddings, same order as g.lane_ids.
std::vector<Tensor> road_gcn_forward(Tape& tape, const RoadGcnParams& params,
                                     const RoadGraph& g);

/// Lanes reachable from the seed lanes (any centerline point within
/// seed_radius of the position) by following successor edges up to `depth`
/// hops, plus the seeds' same-junction predecessors' successors.
std::set<std::string> dfs_candidate_lanes(const Point2& position, const RoadGraph& g,
                                          double seed_radius, int depth);

}  // namespace progd
