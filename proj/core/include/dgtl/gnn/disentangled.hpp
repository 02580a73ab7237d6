#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dgtl/graphdata/tag.hpp"
#include "dgtl/numerics/checkpoint.hpp"
#include "dgtl/numerics/tensor.hpp"

namespace dgtl::gnn {

using numerics::Tensor;

// One disentangled channel: a 2-layer GNN with its own edge scorers and a
// projection into the language-model dimension.
struct ChannelParams {
  Tensor w1, b1;        // [d_lm, d_ch], [d_ch]
  Tensor w2, b2;        // [d_ch, d_ch], [d_ch]
  Tensor s_src, s_dst;  // [d_ch, d_ch] edge-score projections
  Tensor p;             // [d_ch, d_model]

  static ChannelParams init(int d_lm, int d_ch, int d_model, std::uint64_t seed,
                            const std::string& tag);
  std::vector<Tensor> parameters();
};

// The trainable set: K channels plus the structure-mixing coefficient.
struct DisentangledParams {
  std::vector<ChannelParams> channels;
  double delta = 0.8;

  static DisentangledParams init(int k, int d_lm, int d_ch, int d_model,
                                 double delta, std::uint64_t seed);
  int channel_count() const noexcept { return static_cast<int>(channels.size()); }
  std::vector<Tensor> parameters();
  std::vector<numerics::NamedTensor> named_parameters() const;

  void save(const std::filesystem::path& path) const;
  static DisentangledParams load(const std::filesystem::path& path);
};

// All-ones weights over the directed edge list (the binary adjacency).
Tensor binary_edge_weights(const graphdata::DirectedEdges& edges);

// Weighted mean aggregation with an implicit unit self-loop followed by an
// affine map and ReLU: out_u = relu(W^T m_u + b) with
//   m_u = (sum_v w[u<-v] h_v + h_u) / (sum_v w[u<-v] + 1).
Tensor gnn_layer(const Tensor& h, const graphdata::DirectedEdges& edges,
                 const Tensor& weights, const Tensor& w, const Tensor& b);

// Learned continuous edge weights: the weight applied when aggregating
// into u from its neighbor v is
//   delta + (1 - delta) * sigmoid((S_src h_u)^T (S_dst h_v)),
// aligned with the directed edge list (u = dst, v = src). Weights of
// existing edges lie strictly inside (delta, 1); non-edges stay exactly 0
// (they are simply absent). delta = 1 reproduces the binary adjacency
// exactly. The matrix is intentionally not symmetrized.
Tensor edge_weights(const ChannelParams& channel, const Tensor& h,
                    const graphdata::DirectedEdges& edges, double delta);

// Layer 1 on the binary adjacency, learned weights from its output, then
// layer 2 on the weighted structure. Returns [N, d_ch].
Tensor channel_forward(const ChannelParams& channel, const Tensor& h0,
                       const graphdata::DirectedEdges& edges, double delta);

std::vector<Tensor> channel_forward_all(const DisentangledParams& params,
                                        const Tensor& h0,
                                        const graphdata::DirectedEdges& edges);

// Row k = channel k's output at node u projected into the model dimension;
// the row order matches the reserved-position order. Returns [K, d_model].
Tensor injection_rows_for_node(const DisentangledParams& params,
                               std::span<const Tensor> channel_outputs, int u);

Tensor disentangled_forward(const DisentangledParams& params, const Tensor& h0,
                            const graphdata::DirectedEdges& edges, int u);

// Dense [n x n] view of per-edge weights (row = aggregating node); entries
// without an edge are exactly zero. Test and inspection helper.
std::vector<double> dense_edge_weight_matrix(const Tensor& weights,
                                             const graphdata::DirectedEdges& edges,
                                             int n);

}  // namespace dgtl::gnn
