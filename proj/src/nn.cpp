#include "progd/nn.hpp"

#include <cmath>

#include "progd/errors.hpp"

namespace progd {

Tensor ParamStore::insert(const std::string& name, Tensor t) {
  if (index_.count(name)) throw UsageError("duplicate parameter name '" + name + "'");
  index_[name] = ordered_.size();
  ordered_.emplace_back(name, t);
  return t;
}

Tensor ParamStore::uniform_param(const std::string& name, Shape shape, double bound) {
  Tensor t = Tensor::zeros(shape, true);
  for (double& v : t.raw_data()) v = rng_.uniform(-bound, bound);
  return insert(name, t);
}

Tensor ParamStore::normal_param(const std::string& name, Shape shape, double sigma) {
  Tensor t = Tensor::zeros(shape, true);
  for (double& v : t.raw_data()) v = rng_.normal(0.0, sigma);
  return insert(name, t);
}

Tensor ParamStore::const_param(const std::string& name, Shape shape, double value) {
  return insert(name, Tensor::full(shape, value, true));
}

Tensor ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter '" + name + "'");
  return ordered_[it->second].second;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : ordered_) n += t.numel();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& [name, t] : ordered_) t.zero_grad();
}

nlohmann::json ParamStore::to_json() const {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& [name, t] : ordered_) {
    nlohmann::json rec;
    rec["name"] = name;
    rec["shape"] = t.shape();
    rec["data"] = std::vector<double>(t.data().begin(), t.data().end());
    records.push_back(rec);
  }
  return records;
}

void ParamStore::load_json(const nlohmann::json& records) {
  if (!records.is_array())
    throw ValidationError("checkpoint params must be an array of records");
  if (records.size() != ordered_.size())
    throw ValidationError("checkpoint has " + std::to_string(records.size()) +
                          " params, model expects " + std::to_string(ordered_.size()));
  for (const auto& rec : records) {
    const std::string name = rec.at("name").get<std::string>();
    auto it = index_.find(name);
    if (it == index_.end()) throw ValidationError("checkpoint param '" + name + "' is unknown");
    Tensor t = ordered_[it->second].second;
    const Shape shape = rec.at("shape").get<Shape>();
    if (shape != t.shape())
      throw ValidationError("checkpoint param '" + name + "' has shape " + shape_str(shape) +
                            ", model expects " + shape_str(t.shape()));
    const auto data = rec.at("data").get<std::vector<double>>();
    if (data.size() != t.numel())
      throw ValidationError("checkpoint param '" + name + "' data length mismatch");
    std::copy(data.begin(), data.end(), t.raw_data().begin());
  }
}

Linear make_linear(ParamStore& ps, const std::string& name, std::size_t in, std::size_t out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  return Linear{ps.uniform_param(name + ".w", {in, out}, bound),
                ps.uniform_param(name + ".b", {out}, bound)};
}

Tensor linear(Tape& tape, const Tensor& x, const Linear& l) {
  if (x.rank() == 1) {
    Tensor x2 = reshape(tape, x, {1, x.numel()});
    Tensor y = add(tape, matmul(tape, x2, l.w), l.b);
    return reshape(tape, y, {l.w.shape()[1]});
  }
  return add(tape, matmul(tape, x, l.w), l.b);
}

Mlp2 make_mlp2(ParamStore& ps, const std::string& name, std::size_t in, std::size_t hidden,
               std::size_t out) {
  return Mlp2{make_linear(ps, name + ".l1", in, hidden), make_linear(ps, name + ".l2", hidden, out)};
}

Tensor mlp2(Tape& tape, const Tensor& x, const Mlp2& m) {
  return linear(tape, relu(tape, linear(tape, x, m.l1)), m.l2);
}

Mlp3 make_mlp3(ParamStore& ps, const std::string& name, std::size_t in, std::size_t hidden,
               std::size_t out) {
  return Mlp3{make_linear(ps, name + ".l1", in, hidden),
              make_linear(ps, name + ".l2", hidden, hidden),
              make_linear(ps, name + ".l3", hidden, out)};
}

Tensor mlp3(Tape& tape, const Tensor& x, const Mlp3& m) {
  Tensor h = relu(tape, linear(tape, x, m.l1));
  h = relu(tape, linear(tape, h, m.l2));
  return linear(tape, h, m.l3);
}

LayerNormParams make_layer_norm(ParamStore& ps, const std::string& name, std::size_t d) {
  return LayerNormParams{ps.const_param(name + ".gain", {d}, 1.0),
                         ps.const_param(name + ".bias", {d}, 0.0)};
}

Tensor apply_layer_norm(Tape& tape, const Tensor& x, const LayerNormParams& p) {
  return layer_norm(tape, x, p.gain, p.bias);
}

MultiHeadAttention make_mha(ParamStore& ps, const std::string& name, std::size_t d,
                            std::size_t n_heads) {
  if (n_heads == 0 || d % n_heads != 0)
    throw ValidationError("attention width " + std::to_string(d) +
                          " is not divisible by " + std::to_string(n_heads) + " heads");
  MultiHeadAttention p;
  const std::size_t dh = d / n_heads;
  for (std::size_t h = 0; h < n_heads; ++h) {
    const std::string base = name + ".h" + std::to_string(h);
    p.heads.push_back(AttentionHead{make_linear(ps, base + ".q", d, dh),
                                    make_linear(ps, base + ".k", d, dh),
                                    make_linear(ps, base + ".v", d, dh)});
  }
  p.out = make_linear(ps, name + ".out", d, d);
  return p;
}

Tensor mha(Tape& tape, const Tensor& x, const MultiHeadAttention& p) {
  const std::size_t dh = p.heads[0].q.w.shape()[1];
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> outs;
  outs.reserve(p.heads.size());
  for (const AttentionHead& h : p.heads) {
    Tensor q = linear(tape, x, h.q);
    Tensor k = linear(tape, x, h.k);
    Tensor v = linear(tape, x, h.v);
    Tensor scores = scale(tape, matmul(tape, q, transpose(tape, k)), inv_sqrt);
    outs.push_back(matmul(tape, softmax_lastdim(tape, scores), v));
  }
  return linear(tape, concat_lastdim(tape, outs), p.out);
}

TransformerBlock make_transformer_block(ParamStore& ps, const std::string& name, std::size_t d,
                                        std::size_t n_heads, std::size_t ff_hidden) {
  TransformerBlock b;
  b.attn = make_mha(ps, name + ".attn", d, n_heads);
  b.ln1 = make_layer_norm(ps, name + ".ln1", d);
  b.ln2 = make_layer_norm(ps, name + ".ln2", d);
  b.ff = make_mlp2(ps, name + ".ff", d, ff_hidden, d);
  return b;
}

Tensor transformer_block(Tape& tape, const Tensor& x, const TransformerBlock& p) {
  Tensor h = apply_layer_norm(tape, add(tape, x, mha(tape, x, p.attn)), p.ln1);
  return apply_layer_norm(tape, add(tape, h, mlp2(tape, h, p.ff)), p.ln2);
}

GraphAttention make_graph_attention(ParamStore& ps, const std::string& name, std::size_t d) {
  return GraphAttention{make_linear(ps, name + ".q", d, d), make_linear(ps, name + ".k", d, d),
                        make_linear(ps, name + ".v", d, d), make_layer_norm(ps, name + ".ln", d)};
}

std::vector<Tensor> graph_attention(Tape& tape, const std::vector<Tensor>& feats,
                                    const std::vector<std::vector<std::size_t>>& neighbors,
                                    const GraphAttention& p) {
  const std::size_t d = feats.empty() ? 0 : feats[0].numel();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<Tensor> out;
  out.reserve(feats.size());
  for (std::size_t i = 0; i < feats.size(); ++i) {
    std::vector<Tensor> tokens{feats[i]};  // self first, then neighbors in order
    for (std::size_t j : neighbors[i]) tokens.push_back(feats[j]);
    Tensor tok = stack_rows(tape, tokens);
    Tensor q = reshape(tape, linear(tape, feats[i], p.q), {1, d});
    Tensor k = linear(tape, tok, p.k);
    Tensor v = linear(tape, tok, p.v);
    Tensor scores = scale(tape, matmul(tape, q, transpose(tape, k)), inv_sqrt);
    Tensor attn = reshape(tape, matmul(tape, softmax_lastdim(tape, scores), v), {d});
    out.push_back(apply_layer_norm(tape, add(tape, feats[i], attn), p.ln));
  }
  return out;
}

Tensor sinusoidal_pe(std::size_t steps, std::size_t d) {
  Tensor pe = Tensor::zeros({steps, d});
  auto data = pe.raw_data();
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t j = 0; j < d; ++j) {
      const double freq =
          std::pow(10000.0, -static_cast<double>(2 * (j / 2)) / static_cast<double>(d));
      const double angle = static_cast<double>(t) * freq;
      data[t * d + j] = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  return pe;
}

}  // namespace progd
