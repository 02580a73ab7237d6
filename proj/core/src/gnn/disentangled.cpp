#include "dgtl/gnn/disentangled.hpp"

#include <cmath>
#include <unordered_map>

#include "dgtl/errors.hpp"
#include "dgtl/numerics/ops.hpp"
#include "dgtl/numerics/rng.hpp"

namespace dgtl::gnn {

using namespace dgtl::numerics;

namespace {

Tensor gaussian_tensor(Shape shape, double stddev, std::uint64_t seed,
                       const std::string& tag) {
  Rng rng(derive_seed(seed, tag));
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.gaussian(0.0, stddev);
  return Tensor::from(std::move(shape), std::move(v), true);
}

}  // namespace

ChannelParams ChannelParams::init(int d_lm, int d_ch, int d_model,
                                  std::uint64_t seed, const std::string& tag) {
  if (d_lm <= 0 || d_ch <= 0 || d_model <= 0) {
    throw ValueError("channel dimensions must be positive");
  }
  ChannelParams c;
  c.w1 = gaussian_tensor({d_lm, d_ch}, 1.0 / std::sqrt(d_lm), seed, tag + ".W1");
  c.b1 = Tensor::zeros({d_ch}, true);
  c.w2 = gaussian_tensor({d_ch, d_ch}, 1.0 / std::sqrt(d_ch), seed, tag + ".W2");
  c.b2 = Tensor::zeros({d_ch}, true);
  c.s_src = gaussian_tensor({d_ch, d_ch}, 0.5 / std::sqrt(d_ch), seed, tag + ".S_src");
  c.s_dst = gaussian_tensor({d_ch, d_ch}, 0.5 / std::sqrt(d_ch), seed, tag + ".S_dst");
  c.p = gaussian_tensor({d_ch, d_model}, 0.1 / std::sqrt(d_ch), seed, tag + ".P");
  return c;
}

std::vector<Tensor> ChannelParams::parameters() {
  return {w1, b1, w2, b2, s_src, s_dst, p};
}

DisentangledParams DisentangledParams::init(int k, int d_lm, int d_ch,
                                            int d_model, double delta,
                                            std::uint64_t seed) {
  if (k < 1) throw ValueError("need at least one channel");
  if (delta < 0.0 || delta > 1.0) throw ValueError("delta must lie in [0,1]");
  DisentangledParams p;
  p.delta = delta;
  for (int i = 0; i < k; ++i) {
    p.channels.push_back(
        ChannelParams::init(d_lm, d_ch, d_model, seed, "channel" + std::to_string(i)));
  }
  return p;
}

std::vector<Tensor> DisentangledParams::parameters() {
  std::vector<Tensor> out;
  for (auto& c : channels) {
    for (auto& t : c.parameters()) out.push_back(t);
  }
  return out;
}

std::vector<NamedTensor> DisentangledParams::named_parameters() const {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const std::string p = "channel" + std::to_string(i) + ".";
    const ChannelParams& c = channels[i];
    out.push_back({p + "W1", c.w1});
    out.push_back({p + "b1", c.b1});
    out.push_back({p + "W2", c.w2});
    out.push_back({p + "b2", c.b2});
    out.push_back({p + "S_src", c.s_src});
    out.push_back({p + "S_dst", c.s_dst});
    out.push_back({p + "P", c.p});
  }
  return out;
}

void DisentangledParams::save(const std::filesystem::path& path) const {
  auto named = named_parameters();
  named.push_back({"delta", Tensor::scalar(delta)});
  save_checkpoint(path, named);
}

DisentangledParams DisentangledParams::load(const std::filesystem::path& path) {
  auto tensors = load_checkpoint(path);
  std::unordered_map<std::string, Tensor> by_name;
  for (auto& nt : tensors) by_name.emplace(nt.name, nt.tensor);
  DisentangledParams params;
  const auto dit = by_name.find("delta");
  if (dit == by_name.end()) throw CheckpointError("checkpoint missing delta");
  params.delta = dit->second.values()[0];
  auto take = [&](const std::string& name) {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointError("checkpoint missing tensor " + name);
    Tensor t = it->second;
    t.set_requires_grad(true);
    return t;
  };
  for (int i = 0;; ++i) {
    const std::string p = "channel" + std::to_string(i) + ".";
    if (!by_name.count(p + "W1")) break;
    ChannelParams c;
    c.w1 = take(p + "W1");
    c.b1 = take(p + "b1");
    c.w2 = take(p + "W2");
    c.b2 = take(p + "b2");
    c.s_src = take(p + "S_src");
    c.s_dst = take(p + "S_dst");
    c.p = take(p + "P");
    params.channels.push_back(std::move(c));
  }
  if (params.channels.empty()) throw CheckpointError("checkpoint holds no channels");
  return params;
}

Tensor binary_edge_weights(const graphdata::DirectedEdges& edges) {
  if (edges.count() == 0) return Tensor();
  return Tensor::full({static_cast<int>(edges.count())}, 1.0);
}

Tensor gnn_layer(const Tensor& h, const graphdata::DirectedEdges& edges,
                 const Tensor& weights, const Tensor& w, const Tensor& b) {
  // With no edges the mean collapses to the unit self-loop, m_u = h_u.
  Tensor m = edges.count() == 0
                 ? h
                 : weighted_mean_aggregate(h, weights, edges.dst, edges.src);
  return relu(add_bias(matmul(m, w), b));
}

Tensor edge_weights(const ChannelParams& channel, const Tensor& h,
                    const graphdata::DirectedEdges& edges, double delta) {
  if (delta < 0.0 || delta > 1.0) throw ValueError("delta must lie in [0,1]");
  if (edges.count() == 0) return Tensor();
  Tensor hs = matmul(h, channel.s_src, false, true);  // row u = S_src h_u
  Tensor hd = matmul(h, channel.s_dst, false, true);  // row v = S_dst h_v
  Tensor scores = rowwise_dot(gather_rows(hs, edges.dst), gather_rows(hd, edges.src));
  return add_scalar(scale(sigmoid(scores), 1.0 - delta), delta);
}

Tensor channel_forward(const ChannelParams& channel, const Tensor& h0,
                       const graphdata::DirectedEdges& edges, double delta) {
  Tensor ones = binary_edge_weights(edges);
  Tensor h1 = gnn_layer(h0, edges, ones, channel.w1, channel.b1);
  Tensor learned = edge_weights(channel, h1, edges, delta);
  return gnn_layer(h1, edges, learned, channel.w2, channel.b2);
}

std::vector<Tensor> channel_forward_all(const DisentangledParams& params,
                                        const Tensor& h0,
                                        const graphdata::DirectedEdges& edges) {
  std::vector<Tensor> out;
  out.reserve(params.channels.size());
  for (const auto& c : params.channels) {
    out.push_back(channel_forward(c, h0, edges, params.delta));
  }
  return out;
}

Tensor injection_rows_for_node(const DisentangledParams& params,
                               std::span<const Tensor> channel_outputs, int u) {
  if (channel_outputs.size() != params.channels.size()) {
    throw ShapeError("channel output count does not match channel count");
  }
  std::vector<Tensor> rows;
  rows.reserve(channel_outputs.size());
  for (std::size_t i = 0; i < channel_outputs.size(); ++i) {
    Tensor at_u = slice_rows(channel_outputs[i], u, u + 1);
    rows.push_back(matmul(at_u, params.channels[i].p));
  }
  return concat_rows(rows);
}

Tensor disentangled_forward(const DisentangledParams& params, const Tensor& h0,
                            const graphdata::DirectedEdges& edges, int u) {
  const auto outputs = channel_forward_all(params, h0, edges);
  return injection_rows_for_node(params, outputs, u);
}

std::vector<double> dense_edge_weight_matrix(const Tensor& weights,
                                             const graphdata::DirectedEdges& edges,
                                             int n) {
  if (weights.size() != edges.count()) {
    throw ShapeError("weight count does not match edge count");
  }
  std::vector<double> dense(static_cast<std::size_t>(n) * n, 0.0);
  for (std::size_t i = 0; i < edges.count(); ++i) {
    dense[static_cast<std::size_t>(edges.dst[i]) * n + edges.src[i]] = weights.values()[i];
  }
  return dense;
}

}  // namespace dgtl::gnn
