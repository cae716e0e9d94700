#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "progd/rng.hpp"
#include "progd/tensor.hpp"

namespace progd {

/// Owns every learnable tensor of a model, keyed by a hierarchical name.
/// Creation order is fixed by the construction code, which makes optimizer
/// sweeps and checkpoints deterministic.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed) : rng_(seed) {}

  Tensor uniform_param(const std::string& name, Shape shape, double bound);
  Tensor normal_param(const std::string& name, Shape shape, double sigma);
  Tensor const_param(const std::string& name, Shape shape, double value);

  Tensor get(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) > 0; }
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return ordered_; }
  std::size_t scalar_count() const;
  void zero_grads();

  // Flat (name, shape, data) records.
  nlohmann::json to_json() const;
  /// Restores values into existing parameters; any mismatch names the key.
  void load_json(const nlohmann::json& records);

 private:
  Tensor insert(const std::string& name, Tensor t);
  Rng rng_;
  std::vector<std::pair<std::string, Tensor>> ordered_;
  std::map<std::string, std::size_t> index_;
};

struct Linear {
  Tensor w;  // [in, out]
  Tensor b;  // [out]
};

Linear make_linear(ParamStore& ps, const std::string& name, std::size_t in, std::size_t out);
Tensor linear(Tape& tape, const Tensor& x, const Linear& l);

struct Mlp2 {
  Linear l1, l2;
};
Mlp2 make_mlp2(ParamStore& ps, const std::string& name, std::size_t in, std::size_t hidden,
               std::size_t out);
Tensor mlp2(Tape& tape, const Tensor& x, const Mlp2& m);

struct Mlp3 {
  Linear l1, l2, l3;
};
Mlp3 make_mlp3(ParamStore& ps, const std::string& name, std::size_t in, std::size_t hidden,
               std::size_t out);
Tensor mlp3(Tape& tape, const Tensor& x, const Mlp3& m);

struct LayerNormParams {
  Tensor gain, bias;
};
LayerNormParams make_layer_norm(ParamStore& ps, const std::string& name, std::size_t d);
Tensor apply_layer_norm(Tape& tape, const Tensor& x, const LayerNormParams& p);

struct AttentionHead {
  Linear q, k, v;
};

struct MultiHeadAttention {
  std::vector<AttentionHead> heads;
  Linear out;
};
MultiHeadAttention make_mha(ParamStore& ps, const std::string& name, std::size_t d,
                            std::size_t n_heads);
/// Self-attention over the rows of X [T, d].
Tensor mha(Tape& tape, const Tensor& x, const MultiHeadAttention& p);

/// Post-norm transformer block: LN(x + MHA(x)), then LN(x + FF(x)).
struct TransformerBlock {
  MultiHeadAttention attn;
  LayerNormParams ln1, ln2;
  Mlp2 ff;
};
TransformerBlock make_transformer_block(ParamStore& ps, const std::string& name, std::size_t d,
                                        std::size_t n_heads, std::size_t ff_hidden);
Tensor transformer_block(Tape& tape, const Tensor& x, const TransformerBlock& p);

/// Single-head attention of one node over itself plus its graph neighbors,
/// with residual and layer norm.
struct GraphAttention {
  Linear q, k, v;
  LayerNormParams ln;
};
GraphAttention make_graph_attention(ParamStore& ps, const std::string& name, std::size_t d);
std::vector<Tensor> graph_attention(Tape& tape, const std::vector<Tensor>& feats,
                                    const std::vector<std::vector<std::size_t>>& neighbors,
                                    const GraphAttention& p);

/// Sinusoidal positional encoding, rows = timesteps.
Tensor sinusoidal_pe(std::size_t steps, std::size_t d);

}  // namespace progd
