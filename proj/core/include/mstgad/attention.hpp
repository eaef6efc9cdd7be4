#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "mstgad/tensor.hpp"

namespace mstgad {

// Attention primitives. Node/edge attention operates on an edge-list layout:
// edge features are stored as one row per adjacency edge (self-loops
// included), in the order given by GraphTopology::edges.

struct AttentionHeadParams {
  Tensor w_q;  // d_model x d_k
  Tensor w_k;  // d_model x d_k
  Tensor w_v;  // d_model x d_v
};

struct AttentionParams {
  std::vector<AttentionHeadParams> heads;
  Tensor w_o;  // (h * d_v) x d_model
};

// Single-head edge-aware graph attention parameters. The score combine
// weight and the value map are separate parameters; the score is
// beta^T LeakyReLU(w_c [v_i || v_u || e_iu]).
struct GraphAttentionParams {
  Tensor w_c;   // hidden x (2 F_v + F_e)
  Tensor beta;  // hidden x 1
  Tensor w_v;   // d_v x F_v
};

struct GraphMultiHeadParams {
  std::vector<GraphAttentionParams> heads;
  Tensor w_o;  // (h * d_v) x d_model
};

// Static graph structure shared by every timestamp: adjacency with
// self-loops, symmetrized node neighborhoods, and the edge line graph
// (edges are neighbors iff they share at least one endpoint).
struct GraphTopology {
  std::size_t n = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // (src, dst), A[src][dst] == 1
  std::vector<std::vector<std::size_t>> node_neighbors;    // includes self, sorted
  // For node i and its u-th neighbor: row index into the edge list used as
  // e_iu (E[i][u] when that edge exists, otherwise E[u][i]).
  std::vector<std::vector<std::size_t>> node_neighbor_edges;
  std::vector<std::vector<std::size_t>> edge_neighbors;  // includes self
  // Shared endpoints for each (edge, neighbor edge) pair; one or two node
  // ids. Two ids mean the score uses the mean of both updated features.
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> edge_shared_nodes;

  std::size_t edge_count() const { return edges.size(); }
  std::optional<std::size_t> edge_index(std::size_t i, std::size_t j) const;

  // row-major n x n adjacency in {0,1}; missing self-loops are an error.
  static GraphTopology from_adjacency(const std::vector<std::uint8_t>& adjacency,
                                      std::size_t n);
  // Arbitrary edge list; nodes without a self-loop edge are accepted here
  // but rejected by graph_node_attention when it needs e_ii.
  static GraphTopology from_edges(std::size_t n,
                                  std::vector<std::pair<std::size_t, std::size_t>> edge_list);

  static constexpr std::size_t kNoEdge = static_cast<std::size_t>(-1);

 private:
  std::unordered_map<std::uint64_t, std::size_t> edge_lookup_;
};

// Softmax(Q K^T / sqrt(d_k) + mask) V, additive mask (0 / -1e9 entries).
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const Tensor* mask = nullptr);

// Softmax(Q K^T / sqrt(d_k) + C + mask) V; C is the shared cross-modal
// score matrix added to every head.
Tensor temporal_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                          const Tensor& c, const Tensor* mask = nullptr);

Tensor multi_head(const Tensor& q, const Tensor& k, const Tensor& v,
                  const AttentionParams& params, const Tensor* mask = nullptr,
                  const Tensor* shared_score = nullptr);

// nodes: N x F_v; edge_feats: one row per topology edge (F_e wide).
// Output: N x d_v (single head) with softmax over N(i) only.
Tensor graph_node_attention(const Tensor& nodes, const Tensor& edge_feats,
                            const GraphTopology& topo, const GraphAttentionParams& params);

// Roles exchanged: each edge attends over edges sharing an endpoint; the
// shared endpoint's updated node feature fills the third score slot.
Tensor graph_edge_attention(const Tensor& edge_feats, const Tensor& nodes_updated,
                            const GraphTopology& topo, const GraphAttentionParams& params);

Tensor graph_node_attention_multihead(const Tensor& nodes, const Tensor& edge_feats,
                                      const GraphTopology& topo,
                                      const GraphMultiHeadParams& params);
Tensor graph_edge_attention_multihead(const Tensor& edge_feats, const Tensor& nodes_updated,
                                      const GraphTopology& topo,
                                      const GraphMultiHeadParams& params);

// C = (M M^T/sqrt(F_m) + L L^T/sqrt(F_l) + S S^T/sqrt(F_s)) / 3 for aligned
// k x F sequences of the three modalities.
Tensor build_shared_score(const Tensor& metric_seq, const Tensor& log_seq,
                          const Tensor& trace_seq);

// k x k additive mask: entries (i, j) with j > i set to -1e9.
Tensor causal_mask(std::size_t k);

inline constexpr double kMaskValue = -1e9;

}  // namespace mstgad
