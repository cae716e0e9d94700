#pragma once

#include <string>
#include <vector>

#include "progd/nn.hpp"
#include "progd/scenario.hpp"
#include "progd/tensor.hpp"

namespace progd {

/// One heterogeneous graph convolution layer: self-transform plus per-edge-type
/// message / max-pool / transform branches. Messages are computed from the
/// pairwise features and relative coordinates, concat(x_i, x_j, c_j - c_i).
/// Encoder layers additionally carry a lane-lane branch that updates lane
/// nodes; decoder layers keep lane features frozen.
struct HeteroLayerParams {
  Mlp2 message;  // [2d + 2] -> d
  Mlp2 f_agent;  // d -> d
  Mlp2 f_lane;   // d -> d
  Mlp2 g_self;   // d -> d
  bool lane_update = false;
  Mlp2 lane_message;  // [2d + 2] -> d
  Mlp2 f_lane_lane;   // d -> d
  Mlp2 g_lane;        // d -> d
};

HeteroLayerParams make_hetero_layer(ParamStore& ps, const std::string& name, std::size_t d,
                                    bool lane_update);

/// z_i = g(x_i) + f_a(max over agent neighbors) + f_l(max over lane neighbors).
/// An empty neighborhood contributes nothing to the sum.
Tensor hetero_agent_update(Tape& tape, const HeteroLayerParams& p, const Tensor& x_i,
                           const Point2& c_i, const std::vector<const Tensor*>& agent_feats,
                           const std::vector<Point2>& agent_pos,
                           const std::vector<const Tensor*>& lane_feats,
                           const std::vector<Point2>& lane_pos);

/// Lane-node update with the lane-lane branch only.
Tensor hetero_lane_update(Tape& tape, const HeteroLayerParams& p, const Tensor& x_l,
                          const Point2& c_l, const std::vector<const Tensor*>& lane_feats,
                          const std::vector<Point2>& lane_pos);

}  // namespace progd
