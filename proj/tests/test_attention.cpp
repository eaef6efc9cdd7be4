#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "mstgad/attention.hpp"
#include "mstgad/tensor.hpp"

using namespace mstgad;

namespace {

std::mt19937_64 g_rng(12345);

Tensor random_tensor(std::vector<std::size_t> shape, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (auto& x : v) x = dist(g_rng);
  return Tensor::from_data(std::move(shape), std::move(v));
}

// Naive per-row scaled-dot attention, independent of the tensor library path.
std::vector<double> naive_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  std::size_t lq = q.rows(), lk = k.rows(), dk = q.cols(), dv = v.cols();
  std::vector<double> out(lq * dv, 0.0);
  for (std::size_t i = 0; i < lq; ++i) {
    std::vector<double> s(lk, 0.0);
    double mx = -1e300;
    for (std::size_t j = 0; j < lk; ++j) {
      for (std::size_t p = 0; p < dk; ++p) s[j] += q.at(i, p) * k.at(j, p);
      s[j] /= std::sqrt(double(dk));
      mx = std::max(mx, s[j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < lk; ++j) {
      s[j] = std::exp(s[j] - mx);
      z += s[j];
    }
    for (std::size_t j = 0; j < lk; ++j)
      for (std::size_t p = 0; p < dv; ++p) out[i * dv + p] += s[j] / z * v.at(j, p);
  }
  return out;
}

GraphAttentionParams random_gat_params(std::size_t fv, std::size_t fe, std::size_t dv,
                                       std::size_t hidden) {
  GraphAttentionParams p;
  p.w_c = random_tensor({hidden, 2 * fv + fe});
  p.beta = random_tensor({hidden, 1});
  p.w_v = random_tensor({dv, fv});
  return p;
}

// Brute-force edge-aware node attention over a dense adjacency/edge tensor.
// Neighborhoods symmetrize direction; e_iu falls back to E[u][i].
std::vector<double> naive_node_attention(const std::vector<double>& nodes,
                                         const std::vector<double>& dense_edges,
                                         const std::vector<std::uint8_t>& adj, std::size_t n,
                                         std::size_t fv, std::size_t fe,
                                         const GraphAttentionParams& p) {
  std::size_t hidden = p.w_c.rows(), dv = p.w_v.rows();
  std::vector<double> out(n * dv, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> nbrs;
    for (std::size_t u = 0; u < n; ++u)
      if (u == i || adj[i * n + u] || adj[u * n + i]) nbrs.push_back(u);
    std::vector<double> scores;
    for (std::size_t u : nbrs) {
      std::vector<double> cat(2 * fv + fe);
      for (std::size_t f = 0; f < fv; ++f) cat[f] = nodes[i * fv + f];
      for (std::size_t f = 0; f < fv; ++f) cat[fv + f] = nodes[u * fv + f];
      const double* e = adj[i * n + u] ? &dense_edges[(i * n + u) * fe]
                                       : &dense_edges[(u * n + i) * fe];
      for (std::size_t f = 0; f < fe; ++f) cat[2 * fv + f] = e[f];
      double s = 0.0;
      for (std::size_t h = 0; h < hidden; ++h) {
        double acc = 0.0;
        for (std::size_t f = 0; f < cat.size(); ++f) acc += p.w_c.at(h, f) * cat[f];
        if (acc < 0.0) acc *= 0.2;
        s += p.beta.at(h, 0) * acc;
      }
      scores.push_back(s);
    }
    double mx = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (auto& s : scores) {
      s = std::exp(s - mx);
      z += s;
    }
    for (std::size_t uidx = 0; uidx < nbrs.size(); ++uidx) {
      std::size_t u = nbrs[uidx];
      for (std::size_t d = 0; d < dv; ++d) {
        double wv = 0.0;
        for (std::size_t f = 0; f < fv; ++f) wv += p.w_v.at(d, f) * nodes[u * fv + f];
        out[i * dv + d] += scores[uidx] / z * wv;
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("scaled dot attention with a single key returns V") {
  Tensor q = random_tensor({1, 4});
  Tensor k = random_tensor({1, 4});
  Tensor v = random_tensor({1, 3});
  Tensor out = scaled_dot_attention(q, k, v);
  for (std::size_t j = 0; j < 3; ++j) CHECK(out.at(0, j) == doctest::Approx(v.at(0, j)));
}

TEST_CASE("identical keys give the column mean of V") {
  Tensor q = random_tensor({2, 4});
  Tensor krow = random_tensor({1, 4});
  Tensor k = repeat_row(krow, 3);
  Tensor v = random_tensor({3, 2});
  Tensor out = scaled_dot_attention(q, k, v);
  for (std::size_t j = 0; j < 2; ++j) {
    double mean = (v.at(0, j) + v.at(1, j) + v.at(2, j)) / 3.0;
    CHECK(out.at(0, j) == doctest::Approx(mean));
    CHECK(out.at(1, j) == doctest::Approx(mean));
  }
}

TEST_CASE("scaled dot attention matches the naive loop oracle") {
  for (int rep = 0; rep < 20; ++rep) {
    Tensor q = random_tensor({3, 4});
    Tensor k = random_tensor({5, 4});
    Tensor v = random_tensor({5, 4});
    Tensor out = scaled_dot_attention(q, k, v);
    auto expected = naive_attention(q, k, v);
    for (std::size_t i = 0; i < out.size(); ++i)
      CHECK(std::abs(out.data()[i] - expected[i]) <= 1e-10);
  }
}

TEST_CASE("multi_head with one identity head reduces to scaled dot attention") {
  std::size_t d = 4;
  AttentionParams p;
  std::vector<double> eye(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) eye[i * d + i] = 1.0;
  p.heads.push_back({Tensor::from_data({d, d}, eye), Tensor::from_data({d, d}, eye),
                     Tensor::from_data({d, d}, eye)});
  p.w_o = Tensor::from_data({d, d}, eye);
  Tensor q = random_tensor({3, d});
  Tensor k = random_tensor({5, d});
  Tensor v = random_tensor({5, d});
  Tensor a = multi_head(q, k, v, p);
  Tensor b = scaled_dot_attention(q, k, v);
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(a.data()[i] == doctest::Approx(b.data()[i]).epsilon(1e-12));
}

TEST_CASE("two-head attention equals two single heads concatenated") {
  std::size_t d = 6, dk = 3;
  AttentionParams p;
  for (int h = 0; h < 2; ++h)
    p.heads.push_back({random_tensor({d, dk}), random_tensor({d, dk}), random_tensor({d, dk})});
  p.w_o = random_tensor({2 * dk, d});
  Tensor q = random_tensor({4, d});
  Tensor k = random_tensor({4, d});
  Tensor v = random_tensor({4, d});
  Tensor out = multi_head(q, k, v, p);

  std::vector<Tensor> heads;
  for (const auto& h : p.heads)
    heads.push_back(scaled_dot_attention(matmul(q, h.w_q), matmul(k, h.w_k), matmul(v, h.w_v)));
  Tensor expected = matmul(concat_cols(heads), p.w_o);
  CHECK(out.shape() == std::vector<std::size_t>{4, d});
  for (std::size_t i = 0; i < out.size(); ++i)
    CHECK(out.data()[i] == doctest::Approx(expected.data()[i]).epsilon(1e-12));
}

TEST_CASE("temporal attention with C = 0 equals scaled dot attention exactly") {
  Tensor q = random_tensor({4, 3});
  Tensor k = random_tensor({4, 3});
  Tensor v = random_tensor({4, 5});
  Tensor c = Tensor::zeros({4, 4});
  Tensor a = temporal_attention(q, k, v, c);
  Tensor b = scaled_dot_attention(q, k, v);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);
}

TEST_CASE("temporal attention with zero QK^T weights by Softmax(C)") {
  Tensor q = Tensor::zeros({2, 3});
  Tensor k = Tensor::zeros({2, 3});
  Tensor v = random_tensor({2, 2});
  Tensor c = Tensor::from_data({2, 2}, {0.0, 1.0, 2.0, -1.0});
  Tensor out = temporal_attention(q, k, v, c);
  Tensor w = softmax_rows(c);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double expected = w.at(i, 0) * v.at(0, j) + w.at(i, 1) * v.at(1, j);
      CHECK(out.at(i, j) == doctest::Approx(expected));
    }
}

TEST_CASE("temporal attention with k = 1 returns V regardless of C") {
  Tensor q = random_tensor({1, 3});
  Tensor k = random_tensor({1, 3});
  Tensor v = random_tensor({1, 4});
  Tensor c = Tensor::from_data({1, 1}, {7.5});
  Tensor out = temporal_attention(q, k, v, c);
  for (std::size_t j = 0; j < 4; ++j) CHECK(out.at(0, j) == doctest::Approx(v.at(0, j)));
}

TEST_CASE("temporal attention rejects mismatched C") {
  Tensor q = random_tensor({3, 2});
  Tensor c = Tensor::zeros({2, 2});
  CHECK_THROWS_AS(temporal_attention(q, q, q, c), std::invalid_argument);
}

TEST_CASE("causal mask shape and contents") {
  Tensor m1 = causal_mask(1);
  CHECK(m1.item() == 0.0);
  Tensor m3 = causal_mask(3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(m3.at(i, j) == (j > i ? kMaskValue : 0.0));
  // First row of masked softmax concentrates on position 0.
  Tensor s = softmax_rows(add(random_tensor({3, 3}), m3));
  CHECK(s.at(0, 0) == doctest::Approx(1.0));
  CHECK(s.at(0, 1) <= 1e-9);
  CHECK(s.at(0, 2) <= 1e-9);
}

TEST_CASE("shared score matrix") {
  SUBCASE("all-zero sequences give C = 0") {
    Tensor z = Tensor::zeros({4, 3});
    Tensor c = build_shared_score(z, z, z);
    for (double x : c.data()) CHECK(x == 0.0);
  }
  SUBCASE("identical sequences with equal dims give XX^T/sqrt(F)") {
    Tensor x = random_tensor({4, 3});
    Tensor c = build_shared_score(x, x, x);
    Tensor expected = scale(matmul(x, transpose(x)), 1.0 / std::sqrt(3.0));
    for (std::size_t i = 0; i < c.size(); ++i)
      CHECK(c.data()[i] == doctest::Approx(expected.data()[i]).epsilon(1e-12));
  }
  SUBCASE("random sequences match the direct three-term formula") {
    Tensor m = random_tensor({5, 2}), l = random_tensor({5, 4}), s = random_tensor({5, 3});
    Tensor c = build_shared_score(m, l, s);
    auto term = [](const Tensor& x, std::size_t i, std::size_t j) {
      double acc = 0.0;
      for (std::size_t f = 0; f < x.cols(); ++f) acc += x.at(i, f) * x.at(j, f);
      return acc / std::sqrt(double(x.cols()));
    };
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j)
        CHECK(c.at(i, j) ==
              doctest::Approx((term(m, i, j) + term(l, i, j) + term(s, i, j)) / 3.0));
  }
  SUBCASE("length mismatch is an error") {
    CHECK_THROWS_AS(build_shared_score(Tensor::zeros({4, 2}), Tensor::zeros({3, 2}),
                                       Tensor::zeros({4, 2})),
                    std::invalid_argument);
  }
}

namespace {
struct DenseGraph {
  std::size_t n, fv, fe;
  std::vector<std::uint8_t> adj;        // with self-loops
  std::vector<double> nodes;            // n x fv
  std::vector<double> dense_edges;      // n x n x fe, zero off adjacency
};

DenseGraph random_graph(std::size_t n, std::size_t fv, std::size_t fe, double p_edge = 0.5) {
  std::uniform_real_distribution<double> unit(0.0, 1.0), feat(-1.0, 1.0);
  DenseGraph g{n, fv, fe, std::vector<std::uint8_t>(n * n, 0),
               std::vector<double>(n * fv), std::vector<double>(n * n * fe, 0.0)};
  for (std::size_t i = 0; i < n; ++i) g.adj[i * n + i] = 1;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && unit(g_rng) < p_edge) g.adj[i * n + j] = 1;
  for (auto& x : g.nodes) x = feat(g_rng);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (g.adj[i * n + j])
        for (std::size_t f = 0; f < fe; ++f) g.dense_edges[(i * n + j) * fe + f] = feat(g_rng);
  return g;
}

Tensor edge_rows(const DenseGraph& g, const GraphTopology& topo) {
  std::vector<double> rows(topo.edge_count() * g.fe);
  for (std::size_t e = 0; e < topo.edge_count(); ++e) {
    auto [i, j] = topo.edges[e];
    for (std::size_t f = 0; f < g.fe; ++f)
      rows[e * g.fe + f] = g.dense_edges[(i * g.n + j) * g.fe + f];
  }
  return Tensor::from_data({topo.edge_count(), g.fe}, std::move(rows));
}
}  // namespace

TEST_CASE("isolated node attends only to itself") {
  std::size_t fv = 3, fe = 2, dv = 4;
  auto p = random_gat_params(fv, fe, dv, 5);
  std::vector<std::uint8_t> adj = {1};
  auto topo = GraphTopology::from_adjacency(adj, 1);
  Tensor nodes = random_tensor({1, fv});
  Tensor edges = random_tensor({1, fe});
  Tensor out = graph_node_attention(nodes, edges, topo, p);
  for (std::size_t d = 0; d < dv; ++d) {
    double wv = 0.0;
    for (std::size_t f = 0; f < fv; ++f) wv += p.w_v.at(d, f) * nodes.at(0, f);
    CHECK(out.at(0, d) == doctest::Approx(wv));
  }
}

TEST_CASE("symmetric twin nodes split attention evenly") {
  std::size_t fv = 2, fe = 2;
  auto p = random_gat_params(fv, fe, 3, 4);
  std::vector<std::uint8_t> adj = {1, 1, 1, 1};
  auto topo = GraphTopology::from_adjacency(adj, 2);
  Tensor row = random_tensor({1, fv});
  Tensor nodes = repeat_row(row, 2);
  Tensor erow = random_tensor({1, fe});
  Tensor edges = repeat_row(erow, 4);  // all four edges identical
  Tensor out = graph_node_attention(nodes, edges, topo, p);
  // alpha = [0.5, 0.5]; both value rows are equal, so output = W_v v.
  for (std::size_t d = 0; d < 3; ++d) {
    double wv = 0.0;
    for (std::size_t f = 0; f < fv; ++f) wv += p.w_v.at(d, f) * row.at(0, f);
    CHECK(out.at(0, d) == doctest::Approx(wv));
    CHECK(out.at(1, d) == doctest::Approx(wv));
  }
}

TEST_CASE("graph node attention matches the brute-force oracle") {
  for (int rep = 0; rep < 25; ++rep) {
    std::size_t n = 4, fv = 3, fe = 2;
    auto g = random_graph(n, fv, fe);
    auto p = random_gat_params(fv, fe, 3, 6);
    auto topo = GraphTopology::from_adjacency(g.adj, n);
    Tensor nodes = Tensor::from_data({n, fv}, g.nodes);
    Tensor out = graph_node_attention(nodes, edge_rows(g, topo), topo, p);
    auto expected = naive_node_attention(g.nodes, g.dense_edges, g.adj, n, fv, fe, p);
    for (std::size_t i = 0; i < out.size(); ++i)
      CHECK(std::abs(out.data()[i] - expected[i]) <= 1e-10);
  }
}

TEST_CASE("non-neighbor weight is exactly zero (bit-level)") {
  std::size_t n = 4, fv = 3, fe = 2;
  // 0-1 connected, 2 and 3 isolated (self-loops only).
  std::vector<std::uint8_t> adj(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) adj[i * n + i] = 1;
  adj[0 * n + 1] = 1;
  auto topo = GraphTopology::from_adjacency(adj, n);
  auto p = random_gat_params(fv, fe, 3, 5);
  Tensor nodes = random_tensor({n, fv});
  Tensor edges = random_tensor({topo.edge_count(), fe});
  Tensor base = graph_node_attention(nodes, edges, topo, p);

  // Perturb node 3 heavily; rows 0 and 1 must be bit-identical.
  Tensor nodes2 = Tensor::from_data(nodes.shape(),
                                    std::vector<double>(nodes.data().begin(), nodes.data().end()));
  for (std::size_t f = 0; f < fv; ++f) nodes2.mutable_data()[3 * fv + f] += 1000.0;
  Tensor out2 = graph_node_attention(nodes2, edges, topo, p);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t d = 0; d < 3; ++d) CHECK(base.at(i, d) == out2.at(i, d));
}

TEST_CASE("graph node attention requires self-loop") {
  auto topo = GraphTopology::from_edges(2, {{0, 1}});
  auto p = random_gat_params(2, 2, 2, 3);
  CHECK_THROWS_WITH_AS(graph_node_attention(random_tensor({2, 2}), random_tensor({1, 2}), topo, p),
                       doctest::Contains("self-loop"), std::invalid_argument);
}

TEST_CASE("graph node attention is permutation equivariant") {
  std::size_t n = 5, fv = 3, fe = 2;
  auto g = random_graph(n, fv, fe);
  auto p = random_gat_params(fv, fe, 4, 6);
  auto topo = GraphTopology::from_adjacency(g.adj, n);
  Tensor out = graph_node_attention(Tensor::from_data({n, fv}, g.nodes), edge_rows(g, topo),
                                    topo, p);

  std::vector<std::size_t> perm = {2, 0, 4, 1, 3};  // new id of old node i
  DenseGraph pg{n, fv, fe, std::vector<std::uint8_t>(n * n, 0), std::vector<double>(n * fv),
                std::vector<double>(n * n * fe, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < fv; ++f) pg.nodes[perm[i] * fv + f] = g.nodes[i * fv + f];
    for (std::size_t j = 0; j < n; ++j) {
      pg.adj[perm[i] * n + perm[j]] = g.adj[i * n + j];
      for (std::size_t f = 0; f < fe; ++f)
        pg.dense_edges[(perm[i] * n + perm[j]) * fe + f] = g.dense_edges[(i * n + j) * fe + f];
    }
  }
  auto ptopo = GraphTopology::from_adjacency(pg.adj, n);
  Tensor pout = graph_node_attention(Tensor::from_data({n, fv}, pg.nodes), edge_rows(pg, ptopo),
                                     ptopo, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < 4; ++d)
      CHECK(out.at(i, d) == doctest::Approx(pout.at(perm[i], d)).epsilon(1e-12));
}

TEST_CASE("single edge attends only to itself") {
  auto topo = GraphTopology::from_edges(2, {{0, 1}});
  std::size_t fe = 3, fv = 2, dv = 3;
  auto p = random_gat_params(fe, fv, dv, 4);  // self slot = edges here
  Tensor edges = random_tensor({1, fe});
  Tensor nodes = random_tensor({2, fv});
  Tensor out = graph_edge_attention(edges, nodes, topo, p);
  for (std::size_t d = 0; d < dv; ++d) {
    double wv = 0.0;
    for (std::size_t f = 0; f < fe; ++f) wv += p.w_v.at(d, f) * edges.at(0, f);
    CHECK(out.at(0, d) == doctest::Approx(wv));
  }
}

TEST_CASE("disjoint edges do not attend to each other") {
  auto topo = GraphTopology::from_edges(4, {{0, 1}, {2, 3}});
  std::size_t fe = 2, fv = 2, dv = 2;
  auto p = random_gat_params(fe, fv, dv, 4);
  Tensor edges = random_tensor({2, fe});
  Tensor nodes = random_tensor({4, fv});
  Tensor out = graph_edge_attention(edges, nodes, topo, p);
  for (std::size_t e = 0; e < 2; ++e)
    for (std::size_t d = 0; d < dv; ++d) {
      double wv = 0.0;
      for (std::size_t f = 0; f < fe; ++f) wv += p.w_v.at(d, f) * edges.at(e, f);
      CHECK(out.at(e, d) == doctest::Approx(wv));
    }
}

TEST_CASE("chain edge attention matches the line-graph oracle") {
  // 0 -> 1 -> 2: edges e0 = (0,1), e1 = (1,2) share node 1.
  auto topo = GraphTopology::from_edges(3, {{0, 1}, {1, 2}});
  std::size_t fe = 2, fv = 3, dv = 2, hidden = 4;
  auto p = random_gat_params(fe, fv, dv, hidden);
  Tensor edges = random_tensor({2, fe});
  Tensor nodes = random_tensor({3, fv});
  Tensor out = graph_edge_attention(edges, nodes, topo, p);

  auto score = [&](std::size_t e, std::size_t o, const std::vector<double>& shared) {
    std::vector<double> cat;
    for (std::size_t f = 0; f < fe; ++f) cat.push_back(edges.at(e, f));
    for (std::size_t f = 0; f < fe; ++f) cat.push_back(edges.at(o, f));
    cat.insert(cat.end(), shared.begin(), shared.end());
    double s = 0.0;
    for (std::size_t h = 0; h < hidden; ++h) {
      double acc = 0.0;
      for (std::size_t f = 0; f < cat.size(); ++f) acc += p.w_c.at(h, f) * cat[f];
      if (acc < 0.0) acc *= 0.2;
      s += p.beta.at(h, 0) * acc;
    }
    return s;
  };
  auto node_row = [&](std::size_t i) {
    std::vector<double> r(fv);
    for (std::size_t f = 0; f < fv; ++f) r[f] = nodes.at(i, f);
    return r;
  };
  auto mean_rows = [&](std::size_t a, std::size_t b) {
    std::vector<double> r(fv);
    for (std::size_t f = 0; f < fv; ++f) r[f] = 0.5 * (nodes.at(a, f) + nodes.at(b, f));
    return r;
  };
  // e0's neighborhood: itself (shared endpoints 0 and 1 -> mean) and e1
  // (shared endpoint 1).
  for (std::size_t e = 0; e < 2; ++e) {
    std::size_t other = 1 - e;
    double s_self = score(e, e, mean_rows(topo.edges[e].first, topo.edges[e].second));
    double s_other = score(e, other, node_row(1));
    double mx = std::max(s_self, s_other);
    double z = std::exp(s_self - mx) + std::exp(s_other - mx);
    double a_self = std::exp(s_self - mx) / z, a_other = std::exp(s_other - mx) / z;
    for (std::size_t d = 0; d < dv; ++d) {
      double v_self = 0.0, v_other = 0.0;
      for (std::size_t f = 0; f < fe; ++f) {
        v_self += p.w_v.at(d, f) * edges.at(e, f);
        v_other += p.w_v.at(d, f) * edges.at(other, f);
      }
      CHECK(std::abs(out.at(e, d) - (a_self * v_self + a_other * v_other)) <= 1e-10);
    }
  }
}

TEST_CASE("causal attention output is invariant to future perturbations") {
  std::size_t k = 6, d = 4;
  Tensor mask = causal_mask(k);
  Tensor x = random_tensor({k, d});
  Tensor out = scaled_dot_attention(x, x, x, &mask);
  // Perturb positions > p; rows <= p must be bit-identical.
  std::size_t p = 3;
  Tensor x2 = Tensor::from_data(x.shape(), std::vector<double>(x.data().begin(), x.data().end()));
  for (std::size_t t = p + 1; t < k; ++t)
    for (std::size_t f = 0; f < d; ++f) x2.mutable_data()[t * d + f] += 42.0;
  Tensor out2 = scaled_dot_attention(x2, x2, x2, &mask);
  for (std::size_t t = 0; t <= p; ++t)
    for (std::size_t f = 0; f < d; ++f) CHECK(out.at(t, f) == out2.at(t, f));
}

TEST_CASE("attention weight rows sum to one across variants") {
  for (int rep = 0; rep < 30; ++rep) {
    Tensor q = random_tensor({4, 3}), k = random_tensor({5, 3});
    Tensor scores = softmax_rows(scale(matmul(q, transpose(k)), 1.0 / std::sqrt(3.0)));
    for (std::size_t i = 0; i < 4; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < 5; ++j) s += scores.at(i, j);
      CHECK(std::abs(s - 1.0) <= 1e-6);
    }
  }
}
