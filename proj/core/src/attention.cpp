#include "mstgad/attention.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mstgad {

namespace {
std::uint64_t pair_key(std::size_t i, std::size_t j) {
  return (std::uint64_t(i) << 32) | std::uint64_t(j);
}
}  // namespace

std::optional<std::size_t> GraphTopology::edge_index(std::size_t i, std::size_t j) const {
  auto it = edge_lookup_.find(pair_key(i, j));
  if (it == edge_lookup_.end()) return std::nullopt;
  return it->second;
}

GraphTopology GraphTopology::from_adjacency(const std::vector<std::uint8_t>& adjacency,
                                            std::size_t n) {
  if (adjacency.size() != n * n)
    throw std::invalid_argument("from_adjacency: matrix size does not match n");
  for (std::size_t i = 0; i < n; ++i)
    if (!adjacency[i * n + i])
      throw std::invalid_argument("from_adjacency: missing self-loop at node " +
                                  std::to_string(i));
  std::vector<std::pair<std::size_t, std::size_t>> edge_list;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (adjacency[i * n + j]) edge_list.emplace_back(i, j);
  return from_edges(n, std::move(edge_list));
}

GraphTopology GraphTopology::from_edges(
    std::size_t n, std::vector<std::pair<std::size_t, std::size_t>> edge_list) {
  GraphTopology topo;
  topo.n = n;
  for (auto& [i, j] : edge_list) {
    if (i >= n || j >= n) throw std::invalid_argument("from_edges: node id out of range");
    topo.edge_lookup_[pair_key(i, j)] = topo.edges.size();
    topo.edges.emplace_back(i, j);
  }

  topo.node_neighbors.resize(n);
  topo.node_neighbor_edges.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t u = 0; u < n; ++u) {
      auto out = topo.edge_index(i, u);
      auto in = topo.edge_index(u, i);
      if (u != i && !out && !in) continue;
      topo.node_neighbors[i].push_back(u);
      topo.node_neighbor_edges[i].push_back(out ? *out : (in ? *in : kNoEdge));
    }
  }

  std::size_t ne = topo.edges.size();
  topo.edge_neighbors.resize(ne);
  topo.edge_shared_nodes.resize(ne);
  // Edges indexed per endpoint to avoid the full Ne^2 scan.
  std::vector<std::vector<std::size_t>> incident(n);
  for (std::size_t e = 0; e < ne; ++e) {
    incident[topo.edges[e].first].push_back(e);
    if (topo.edges[e].second != topo.edges[e].first)
      incident[topo.edges[e].second].push_back(e);
  }
  for (std::size_t e = 0; e < ne; ++e) {
    auto [a, b] = topo.edges[e];
    std::vector<std::size_t> nbrs;
    for (std::size_t x : incident[a]) nbrs.push_back(x);
    if (b != a)
      for (std::size_t x : incident[b]) nbrs.push_back(x);
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    for (std::size_t o : nbrs) {
      auto [c, d] = topo.edges[o];
      std::vector<std::size_t> shared;
      if (c == a || c == b) shared.push_back(c);
      if (d != c && (d == a || d == b)) shared.push_back(d);
      topo.edge_neighbors[e].push_back(o);
      if (shared.size() == 2)
        topo.edge_shared_nodes[e].emplace_back(shared[0], shared[1]);
      else
        topo.edge_shared_nodes[e].emplace_back(shared[0], shared[0]);
    }
  }
  return topo;
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const Tensor* mask) {
  if (q.cols() != k.cols()) shape_error("scaled_dot_attention d_k", q, k);
  if (k.rows() != v.rows()) shape_error("scaled_dot_attention L_K", k, v);
  Tensor scores = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(double(q.cols())));
  if (mask) {
    if (mask->rows() != q.rows() || mask->cols() != k.rows())
      shape_error("scaled_dot_attention mask", scores, *mask);
    scores = add(scores, *mask);
  }
  return matmul(softmax_rows(scores), v);
}

Tensor temporal_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                          const Tensor& c, const Tensor* mask) {
  if (q.cols() != k.cols()) shape_error("temporal_attention d_k", q, k);
  if (c.rows() != q.rows() || c.cols() != k.rows())
    shape_error("temporal_attention score matrix", q, c);
  Tensor scores = add(scale(matmul(q, transpose(k)), 1.0 / std::sqrt(double(q.cols()))), c);
  if (mask) scores = add(scores, *mask);
  return matmul(softmax_rows(scores), v);
}

Tensor multi_head(const Tensor& q, const Tensor& k, const Tensor& v,
                  const AttentionParams& params, const Tensor* mask,
                  const Tensor* shared_score) {
  std::vector<Tensor> heads;
  heads.reserve(params.heads.size());
  for (const auto& h : params.heads) {
    Tensor qh = matmul(q, h.w_q);
    Tensor kh = matmul(k, h.w_k);
    Tensor vh = matmul(v, h.w_v);
    heads.push_back(shared_score ? temporal_attention(qh, kh, vh, *shared_score, mask)
                                 : scaled_dot_attention(qh, kh, vh, mask));
  }
  return matmul(concat_cols(heads), params.w_o);
}

namespace {

// Shared score/aggregate kernel: given per-target neighbor rows and the
// triple [self || neighbor || context], returns the attention-weighted sum
// of value rows. One row of output per target.
Tensor attend_neighborhood(const Tensor& self_rows, const Tensor& neighbor_rows,
                           const Tensor& context_rows, const Tensor& value_rows,
                           const GraphAttentionParams& params) {
  Tensor cat = concat_cols({self_rows, neighbor_rows, context_rows});
  Tensor hidden = leaky_relu(matmul(cat, transpose(params.w_c)));
  Tensor scores = transpose(matmul(hidden, params.beta));  // 1 x |N|
  Tensor alpha = softmax_rows(scores);
  return matmul(alpha, matmul(value_rows, transpose(params.w_v)));
}

}  // namespace

Tensor graph_node_attention(const Tensor& nodes, const Tensor& edge_feats,
                            const GraphTopology& topo, const GraphAttentionParams& params) {
  if (nodes.rows() != topo.n) shape_error("graph_node_attention nodes", nodes, nodes);
  if (edge_feats.rows() != topo.edge_count())
    throw std::invalid_argument("graph_node_attention: edge feature rows " +
                                std::to_string(edge_feats.rows()) + " != edge count " +
                                std::to_string(topo.edge_count()));
  std::vector<Tensor> out_rows;
  out_rows.reserve(topo.n);
  for (std::size_t i = 0; i < topo.n; ++i) {
    const auto& nbrs = topo.node_neighbors[i];
    for (std::size_t e : topo.node_neighbor_edges[i])
      if (e == GraphTopology::kNoEdge)
        throw std::invalid_argument("graph_node_attention: node " + std::to_string(i) +
                                    " has no self-loop edge");
    Tensor self = repeat_row(select_rows(nodes, {i}), nbrs.size());
    Tensor nbr = select_rows(nodes, nbrs);
    Tensor ctx = select_rows(edge_feats, topo.node_neighbor_edges[i]);
    out_rows.push_back(attend_neighborhood(self, nbr, ctx, nbr, params));
  }
  return concat_rows(out_rows);
}

Tensor graph_edge_attention(const Tensor& edge_feats, const Tensor& nodes_updated,
                            const GraphTopology& topo, const GraphAttentionParams& params) {
  if (edge_feats.rows() != topo.edge_count())
    throw std::invalid_argument("graph_edge_attention: edge feature rows mismatch");
  std::vector<Tensor> out_rows;
  out_rows.reserve(topo.edge_count());
  for (std::size_t e = 0; e < topo.edge_count(); ++e) {
    const auto& nbrs = topo.edge_neighbors[e];
    const auto& shared = topo.edge_shared_nodes[e];
    std::vector<std::size_t> first_ids, second_ids;
    for (auto& [a, b] : shared) {
      first_ids.push_back(a);
      second_ids.push_back(b);
    }
    Tensor self = repeat_row(select_rows(edge_feats, {e}), nbrs.size());
    Tensor nbr = select_rows(edge_feats, nbrs);
    Tensor ctx = scale(add(select_rows(nodes_updated, first_ids),
                           select_rows(nodes_updated, second_ids)),
                       0.5);
    out_rows.push_back(attend_neighborhood(self, nbr, ctx, nbr, params));
  }
  return concat_rows(out_rows);
}

namespace {
template <typename Fn>
Tensor multihead_graph(const GraphMultiHeadParams& params, Fn&& single_head) {
  std::vector<Tensor> heads;
  heads.reserve(params.heads.size());
  for (const auto& h : params.heads) heads.push_back(single_head(h));
  return matmul(concat_cols(heads), params.w_o);
}
}  // namespace

Tensor graph_node_attention_multihead(const Tensor& nodes, const Tensor& edge_feats,
                                      const GraphTopology& topo,
                                      const GraphMultiHeadParams& params) {
  return multihead_graph(params, [&](const GraphAttentionParams& h) {
    return graph_node_attention(nodes, edge_feats, topo, h);
  });
}

Tensor graph_edge_attention_multihead(const Tensor& edge_feats, const Tensor& nodes_updated,
                                      const GraphTopology& topo,
                                      const GraphMultiHeadParams& params) {
  return multihead_graph(params, [&](const GraphAttentionParams& h) {
    return graph_edge_attention(edge_feats, nodes_updated, topo, h);
  });
}

Tensor build_shared_score(const Tensor& metric_seq, const Tensor& log_seq,
                          const Tensor& trace_seq) {
  if (metric_seq.rows() != log_seq.rows() || metric_seq.rows() != trace_seq.rows())
    shape_error("build_shared_score", metric_seq, trace_seq);
  auto term = [](const Tensor& x) {
    return scale(matmul(x, transpose(x)), 1.0 / std::sqrt(double(x.cols())));
  };
  return scale(add(add(term(metric_seq), term(log_seq)), term(trace_seq)), 1.0 / 3.0);
}

Tensor causal_mask(std::size_t k) {
  Tensor m = Tensor::zeros({k, k});
  auto d = m.mutable_data();
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) d[i * k + j] = kMaskValue;
  return m;
}

}  // namespace mstgad
