// Acceptance gate: nine end-to-end criteria, one verdict line each.
// Exit status is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mstgad/attention.hpp"
#include "mstgad/detection.hpp"
#include "mstgad/graph.hpp"
#include "mstgad/network.hpp"
#include "mstgad/synth.hpp"
#include "mstgad/telemetry.hpp"
#include "mstgad/tensor.hpp"
#include "mstgad/training.hpp"

using namespace mstgad;

namespace {

int g_failed = 0;

void verdict(int idx, const std::string& name, bool ok, const std::string& detail) {
  std::printf("criterion %d [%s] %s: %s\n", idx, ok ? "PASS" : "FAIL", name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failed;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

Tensor random_tensor(std::mt19937_64& rng, std::vector<std::size_t> shape, double lo = -1.0,
                     double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::size_t count = 1;
  for (auto d : shape) count *= d;
  std::vector<double> v(count);
  for (auto& x : v) x = dist(rng);
  return Tensor::from_data(std::move(shape), std::move(v));
}

std::vector<std::uint8_t> random_adjacency(std::mt19937_64& rng, std::size_t n,
                                           double p = 0.5) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::uint8_t> adj(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) adj[i * n + i] = 1;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && u(rng) < p) adj[i * n + j] = 1;
  return adj;
}

GraphSeries random_series(std::mt19937_64& rng, std::size_t n, std::size_t t, std::size_t f_m,
                          std::size_t f_l, std::size_t f_s,
                          const std::vector<std::uint8_t>& adjacency) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GraphSeries series;
  series.adjacency = adjacency;
  for (std::size_t p = 0; p < t; ++p) {
    MstGraph g;
    g.timestamp = std::int64_t(p) * 60;
    g.index = p;
    g.n = n;
    g.f_m = f_m;
    g.f_l = f_l;
    g.f_s = f_s;
    g.node_features.resize(n * (f_m + f_l));
    for (auto& v : g.node_features) v = u(rng);
    g.edge_features.assign(n * n * f_s, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (adjacency[i * n + j])
          for (std::size_t r = 0; r < f_s; ++r) g.edge_features[(i * n + j) * f_s + r] = u(rng);
    series.graphs.push_back(std::move(g));
  }
  return series;
}

// ---------------------------------------------------------------- criterion 1

void criterion_gradients() {
  auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::size_t n = 3, k = 4, f_m = 3, f_l = 2, f_s = 1;
  auto adj = random_adjacency(rng, n, 0.6);
  ModelConfig cfg;
  cfg.d_model = 8;
  cfg.heads = 2;
  cfg.encoder_layers = 1;
  cfg.decoder_layers = 1;
  cfg.window = k;
  cfg.dropout = 0.0;
  cfg.n = n;
  cfg.f_m = f_m;
  cfg.f_l = f_l;
  cfg.f_s = f_s;
  cfg.seed = 101;
  Model model(cfg, GraphTopology::from_adjacency(adj, n));
  GraphSeries series = random_series(rng, n, k + 1, f_m, f_l, f_s, adj);
  WindowSample sample{k, k, {1, 0, -1}};
  WindowTensors w = model.window_tensors(series, sample);
  auto loss = [&]() {
    Reconstruction r = model.forward(w, false, 0);
    Tensor sq = model.squared_residual(w, r);
    Tensor l1 = loss_l1(model.reconstruction_error(sq), sample.labels, 0.01, 1e-6);
    Tensor l2 = loss_l2(model.class_probabilities(sq), sample.labels, 1, 1, 1e-6);
    return combined_loss(l1, l2, 2);
  };
  GradCheckResult res = grad_check(loss, model.parameters(), 1e-4, 1e-3);
  double elapsed = seconds_since(t0);
  double pass_frac = res.total ? double(res.total - res.failed) / double(res.total) : 0.0;
  bool ok = pass_frac >= 0.999 && elapsed < 120.0;
  verdict(1, "gradient fidelity", ok,
          fmt("%zu/%zu entries within 1e-3 (%.4f%%), worst %.3g at %s, %.1fs", res.total - res.failed,
              res.total, 100.0 * pass_frac, res.worst_rel_error, res.worst_entry.c_str(), elapsed));
}

// ---------------------------------------------------------------- criterion 2

void criterion_attention_invariants() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<std::size_t> nd(2, 6);
  std::size_t cases = 0, bad_rows = 0, nonzero_nonneighbor = 0, causal_breaks = 0;
  for (int rep = 0; rep < 100; ++rep) {
    // Graph attention with identity values: output rows are the attention
    // weights themselves.
    std::size_t n = nd(rng);
    auto adj = random_adjacency(rng, n, 0.4);
    auto topo = GraphTopology::from_adjacency(adj, n);
    GraphAttentionParams p;
    p.w_c = random_tensor(rng, {5, 2 * n + 2});
    p.beta = random_tensor(rng, {5, 1});
    std::vector<double> eye(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) eye[i * n + i] = 1.0;
    p.w_v = Tensor::from_data({n, n}, eye);
    Tensor nodes = Tensor::from_data({n, n}, eye);
    Tensor edges = random_tensor(rng, {topo.edge_count(), 2});
    Tensor weights = graph_node_attention(nodes, edges, topo, p);
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t u = 0; u < n; ++u) {
        row += weights.at(i, u);
        bool neighbor = u == i || adj[i * n + u] || adj[u * n + i];
        if (!neighbor && weights.at(i, u) != 0.0) ++nonzero_nonneighbor;
      }
      if (std::abs(row - 1.0) > 1e-6) ++bad_rows;
    }

    // Masked temporal attention: rows at or before a cut are bit-identical
    // under arbitrary perturbation of later rows.
    std::size_t k = 3 + rep % 6, d = 4;
    Tensor q = random_tensor(rng, {k, d});
    Tensor kk = random_tensor(rng, {k, d});
    Tensor v = random_tensor(rng, {k, d});
    Tensor c = random_tensor(rng, {k, k});
    Tensor mask = causal_mask(k);
    Tensor base = temporal_attention(q, kk, v, c, &mask);
    std::size_t cut = rep % (k - 1);
    auto bump = [&](const Tensor& src) {
      std::vector<double> d2(src.data().begin(), src.data().end());
      for (std::size_t r = cut + 1; r < k; ++r)
        for (std::size_t f = 0; f < src.cols(); ++f) d2[r * src.cols() + f] += 37.5 + double(r);
      return Tensor::from_data(src.shape(), std::move(d2));
    };
    Tensor later = temporal_attention(q, bump(kk), bump(v), c, &mask);
    for (std::size_t r = 0; r <= cut; ++r)
      for (std::size_t f = 0; f < d; ++f)
        if (base.at(r, f) != later.at(r, f)) ++causal_breaks;
    ++cases;
  }
  bool ok = bad_rows == 0 && nonzero_nonneighbor == 0 && causal_breaks == 0;
  verdict(2, "attention invariants", ok,
          fmt("%zu cases: %zu rows off by > 1e-6, %zu nonzero non-neighbor weights, %zu causal "
              "breaks",
              cases, bad_rows, nonzero_nonneighbor, causal_breaks));
}

// ---------------------------------------------------------------- criterion 3

// Dense brute-force edge-aware node attention.
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
      const double* e =
          adj[i * n + u] ? &dense_edges[(i * n + u) * fe] : &dense_edges[(u * n + i) * fe];
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

// Line-graph brute force: edges attend over edges sharing an endpoint; the
// shared endpoint's node row (mean when two are shared) fills the last slot.
std::vector<double> naive_edge_attention(const Tensor& edges, const Tensor& nodes,
                                         const std::vector<std::pair<std::size_t, std::size_t>>& el,
                                         const GraphAttentionParams& p) {
  std::size_t ne = el.size(), fe = edges.cols(), fv = nodes.cols();
  std::size_t hidden = p.w_c.rows(), dv = p.w_v.rows();
  std::vector<double> out(ne * dv, 0.0);
  for (std::size_t e = 0; e < ne; ++e) {
    std::vector<std::size_t> nbrs;
    std::vector<std::vector<double>> shared;
    for (std::size_t o = 0; o < ne; ++o) {
      std::vector<std::size_t> common;
      for (std::size_t a : {el[e].first, el[e].second})
        for (std::size_t b : {el[o].first, el[o].second})
          if (a == b && std::find(common.begin(), common.end(), a) == common.end())
            common.push_back(a);
      if (common.empty()) continue;
      nbrs.push_back(o);
      std::vector<double> row(fv, 0.0);
      for (std::size_t id : common)
        for (std::size_t f = 0; f < fv; ++f) row[f] += nodes.at(id, f) / double(common.size());
      shared.push_back(row);
    }
    std::vector<double> scores;
    for (std::size_t idx = 0; idx < nbrs.size(); ++idx) {
      std::vector<double> cat;
      for (std::size_t f = 0; f < fe; ++f) cat.push_back(edges.at(e, f));
      for (std::size_t f = 0; f < fe; ++f) cat.push_back(edges.at(nbrs[idx], f));
      cat.insert(cat.end(), shared[idx].begin(), shared[idx].end());
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
    for (std::size_t idx = 0; idx < nbrs.size(); ++idx)
      for (std::size_t d = 0; d < dv; ++d) {
        double wv = 0.0;
        for (std::size_t f = 0; f < fe; ++f) wv += p.w_v.at(d, f) * edges.at(nbrs[idx], f);
        out[e * dv + d] += scores[idx] / z * wv;
      }
  }
  return out;
}

void criterion_oracles() {
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<std::size_t> nd(2, 5);
  double worst_node = 0.0, worst_edge = 0.0;
  std::size_t temporal_mismatch = 0;
  for (int rep = 0; rep < 50; ++rep) {
    std::size_t n = nd(rng), fv = 3, fe = 2, dv = 3, hidden = 5;
    auto adj = random_adjacency(rng, n, 0.5);
    auto topo = GraphTopology::from_adjacency(adj, n);
    GraphAttentionParams pn;
    pn.w_c = random_tensor(rng, {hidden, 2 * fv + fe});
    pn.beta = random_tensor(rng, {hidden, 1});
    pn.w_v = random_tensor(rng, {dv, fv});
    Tensor nodes = random_tensor(rng, {n, fv});
    std::vector<double> dense(n * n * fe, 0.0);
    std::vector<double> edge_rows(topo.edge_count() * fe);
    {
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      for (std::size_t e = 0; e < topo.edge_count(); ++e)
        for (std::size_t f = 0; f < fe; ++f) {
          double v = u(rng);
          edge_rows[e * fe + f] = v;
          dense[(topo.edges[e].first * n + topo.edges[e].second) * fe + f] = v;
        }
    }
    Tensor edges = Tensor::from_data({topo.edge_count(), fe}, edge_rows);
    Tensor node_out = graph_node_attention(nodes, edges, topo, pn);
    auto node_exp = naive_node_attention(
        std::vector<double>(nodes.data().begin(), nodes.data().end()), dense, adj, n, fv, fe, pn);
    for (std::size_t i = 0; i < node_out.size(); ++i)
      worst_node = std::max(worst_node, std::abs(node_out.data()[i] - node_exp[i]));

    GraphAttentionParams pe;
    pe.w_c = random_tensor(rng, {hidden, 2 * fe + fv});
    pe.beta = random_tensor(rng, {hidden, 1});
    pe.w_v = random_tensor(rng, {dv, fe});
    Tensor nodes_updated = random_tensor(rng, {n, fv});
    Tensor edge_out = graph_edge_attention(edges, nodes_updated, topo, pe);
    auto edge_exp = naive_edge_attention(edges, nodes_updated, topo.edges, pe);
    for (std::size_t i = 0; i < edge_out.size(); ++i)
      worst_edge = std::max(worst_edge, std::abs(edge_out.data()[i] - edge_exp[i]));

    // C = 0 temporal attention reduces to plain scaled-dot, bit for bit.
    std::size_t k = 4 + rep % 4, d = 4;
    Tensor q = random_tensor(rng, {k, d});
    Tensor kk = random_tensor(rng, {k, d});
    Tensor v = random_tensor(rng, {k, d});
    Tensor zero = Tensor::zeros({k, k});
    Tensor ta = temporal_attention(q, kk, v, zero);
    Tensor sd = scaled_dot_attention(q, kk, v);
    for (std::size_t i = 0; i < ta.size(); ++i)
      if (ta.data()[i] != sd.data()[i]) ++temporal_mismatch;
  }
  bool ok = worst_node <= 1e-10 && worst_edge <= 1e-10 && temporal_mismatch == 0;
  verdict(3, "attention oracle equivalence", ok,
          fmt("50 graphs: node attention max |err| %.2e, edge %.2e, temporal C=0 mismatches %zu",
              worst_node, worst_edge, temporal_mismatch));
}

// ---------------------------------------------------------------- criterion 4

void criterion_loss_formulas() {
  auto col = [](std::vector<double> v) {
    std::size_t n = v.size();
    return Tensor::from_data({n, 1}, std::move(v));
  };
  auto probs = [](std::vector<double> p_abn) {
    std::size_t n = p_abn.size();
    std::vector<double> d(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
      d[i * 2] = 1.0 - p_abn[i];
      d[i * 2 + 1] = p_abn[i];
    }
    return Tensor::from_data({n, 2}, std::move(d));
  };
  bool ok = true;
  std::ostringstream why;

  Tensor one = Tensor::scalar(1.0), zero = Tensor::scalar(0.0);
  struct Row {
    std::size_t epoch;
    double w1, w2;
  };
  for (Row r : {Row{1, 1.0, 0.0}, Row{2, 0.5, 0.5}, Row{4, 0.25, 0.75}}) {
    double w1 = combined_loss(one, zero, r.epoch).item();
    double w2 = combined_loss(zero, one, r.epoch).item();
    if (std::abs(w1 - r.w1) > 1e-12 || std::abs(w2 - r.w2) > 1e-12) {
      ok = false;
      why << "epoch " << r.epoch << " weights (" << w1 << ", " << w2 << "); ";
    }
  }

  // Three-instance fixtures, guard_eps = 0 so values are exact.
  double l1 = loss_l1(col({2.0, 4.0, 3.0}), {-1, 1, 0}, 0.01, 0.0).item();
  double l1_exp = (0.01 * 2.0 + 1.0 / 4.0 + 3.0) / 3.0;
  if (std::abs(l1 - l1_exp) > 1e-12) {
    ok = false;
    why << "L1 " << l1 << " != " << l1_exp << "; ";
  }
  double l2 = loss_l2(probs({0.5, 0.25, 0.9}), {1, 0, -1}, 10, 100, 0.0).item();
  double l2_exp = -0.5 * (10.0 * std::log(0.5) + std::log(0.75));
  if (std::abs(l2 - l2_exp) > 1e-12) {
    ok = false;
    why << "L2 " << l2 << " != " << l2_exp << "; ";
  }
  if (ok) why << "schedule weights and 3-instance L1/L2 fixtures exact (guard_eps 0, eta 0.01)";
  verdict(4, "loss schedule and formulas", ok, why.str());
}

// --------------------------------------------------- criteria 5-7 shared path

struct RunSpec {
  std::uint64_t seed = 1;
  std::size_t t = 2000;
  double label_known_fraction = 0.5;
  bool use_sam = true;
  bool use_tam = true;
  std::size_t epochs = 25;
  std::size_t stride = 3;
  double lr = 0.005;
  std::size_t batch_size = 25;
};

struct RunOutcome {
  double f1 = 0.0;
  double roc_auc = 0.0;
  double seconds = 0.0;
};

TelemetrySeries slice_head(const TelemetrySeries& s, std::size_t t1) {
  TelemetrySeries out = s;
  std::size_t n = s.n(), fs = s.f_s();
  out.timestamps.assign(s.timestamps.begin(), s.timestamps.begin() + t1);
  out.metrics.assign(s.metrics.begin(), s.metrics.begin() + t1 * n * s.f_m);
  out.logs.assign(s.logs.begin(), s.logs.begin() + t1 * n * s.f_l);
  out.spans.assign(s.spans.begin(), s.spans.begin() + t1 * n * n * fs);
  return out;
}

RunOutcome run_detection(const RunSpec& spec) {
  auto t0 = std::chrono::steady_clock::now();
  SynthConfig sc;
  sc.seed = spec.seed;
  sc.t = spec.t;
  sc.anomaly_rate = 0.03;
  sc.label_known_fraction = spec.label_known_fraction;
  SynthDataset data = generate(sc);

  auto templates = mine_log_templates(data.logs);
  std::vector<std::string> rtypes;
  for (const auto& s : data.spans)
    if (std::find(rtypes.begin(), rtypes.end(), s.request_type) == rtypes.end())
      rtypes.push_back(s.request_type);
  std::sort(rtypes.begin(), rtypes.end());
  TelemetrySeries series = bucket(data.metrics, data.logs, data.spans, sc.interval,
                                  data.instances, rtypes, templates);
  std::size_t total = series.t_count(), n = series.n();
  std::size_t t_train = std::size_t(0.6 * double(total));
  std::size_t t_val = std::size_t(0.7 * double(total));
  TelemetrySeries train_slice = slice_head(series, t_train);
  auto kept = filter_low_variance_metrics(train_slice, 1e-12);
  apply_metric_filter(series, kept);
  auto adjacency = build_adjacency(train_slice);
  NormalizationStats stats = fit_normalization(train_slice);
  normalize(series, stats);
  GraphSeries gs = build_graphs(series, adjacency);

  std::vector<std::vector<int>> labels(total, std::vector<int>(n, -1));
  for (const auto& r : data.labels) {
    std::size_t t = std::size_t((r.timestamp - series.timestamps.front()) / series.interval);
    for (std::size_t i = 0; i < n; ++i)
      if (data.instances[i] == r.instance_id) labels[t][i] = r.label;
  }
  std::size_t k = 10;
  auto windows = make_windows(gs, labels, k);
  std::vector<WindowSample> wtrain, wval, wtest;
  for (const auto& w : windows) {
    if (w.last < t_train) {
      if ((w.last - (k - 1)) % spec.stride == 0) wtrain.push_back(w);
    } else if (w.last < t_val) {
      wval.push_back(w);
    } else {
      wtest.push_back(w);
    }
  }

  ModelConfig mc;
  mc.d_model = 8;
  mc.heads = 2;
  mc.encoder_layers = 1;
  mc.decoder_layers = 1;
  mc.window = k;
  mc.dropout = 0.0;
  mc.n = n;
  mc.f_m = series.f_m;
  mc.f_l = series.f_l;
  mc.f_s = series.f_s();
  mc.seed = spec.seed;
  mc.use_sam = spec.use_sam;
  mc.use_tam = spec.use_tam;
  Model model(mc, GraphTopology::from_adjacency(adjacency, n));

  LossConfig lc;
  lc.max_epochs = spec.epochs;
  lc.patience = spec.epochs;
  lc.lr = spec.lr;
  lc.batch_size = spec.batch_size;
  lc.n_a = 0;
  lc.n_n = 0;
  for (const auto& w : wtrain)
    for (int l : w.labels) {
      if (l == 1) ++lc.n_a;
      else if (l == 0) ++lc.n_n;
    }
  train_model(model, gs, wtrain, wval, lc);

  // With labels the classifier probability is the anomaly score; without
  // them the head is untrained, so the reconstruction error is. Either way
  // the decision threshold is selected on the validation range.
  auto truth_of = [&](const Score& s) {
    std::size_t t = std::size_t((s.timestamp - series.timestamps.front()) / series.interval);
    return data.truth[t][s.instance];
  };
  bool supervised = spec.label_known_fraction > 0.0;
  auto score_of = [&](const Score& s) { return supervised ? s.p_abnormal : s.re; };

  auto val_scores = score_stream(model, gs, wval);
  std::vector<double> vscore;
  std::vector<int> vtruth;
  for (const auto& s : val_scores) {
    vscore.push_back(score_of(s));
    vtruth.push_back(truth_of(s));
  }
  double threshold = select_threshold(vscore, vtruth);

  auto test_scores = score_stream(model, gs, wtest);
  std::vector<double> score;
  std::vector<int> decided, truth;
  for (const auto& s : test_scores) {
    score.push_back(score_of(s));
    decided.push_back(score.back() > threshold ? 1 : 0);
    truth.push_back(truth_of(s));
  }
  MetricsReport report = evaluate(score, decided, truth);
  return {report.f1, report.roc_auc, seconds_since(t0)};
}

RunOutcome g_full_run;  // criterion 5 result, reused by criterion 6

void criterion_synth_detection() {
  g_full_run = run_detection(RunSpec{});
  bool ok = g_full_run.roc_auc >= 0.90 && g_full_run.f1 >= 0.80 && g_full_run.seconds <= 600.0;
  verdict(5, "end-to-end synthetic detection", ok,
          fmt("ROC-AUC %.3f (>= 0.90), F1 %.3f (>= 0.80), %.0fs (<= 600s)", g_full_run.roc_auc,
              g_full_run.f1, g_full_run.seconds));
}

void criterion_semi_supervision() {
  RunSpec unsupervised;
  unsupervised.label_known_fraction = 0.0;
  RunOutcome base = run_detection(unsupervised);
  double gap = g_full_run.f1 - base.f1;
  bool ok = gap >= 0.03;
  verdict(6, "semi-supervision effect", ok,
          fmt("F1 %.3f with half the anomalies labeled vs %.3f unlabeled (gap %.3f >= 0.03)",
              g_full_run.f1, base.f1, gap));
}

void criterion_ablation() {
  double mean_full = 0.0, mean_no_sam = 0.0, mean_no_tam = 0.0;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    RunSpec full;
    full.seed = seed;
    RunSpec no_sam = full, no_tam = full;
    no_sam.use_sam = false;
    no_tam.use_tam = false;
    // Seed 1 with the full model is exactly the criterion 5 run.
    mean_full += (seed == 1 ? g_full_run.f1 : run_detection(full).f1) / 3.0;
    mean_no_sam += run_detection(no_sam).f1 / 3.0;
    mean_no_tam += run_detection(no_tam).f1 / 3.0;
  }
  bool ok = mean_no_sam < mean_full && mean_no_tam < mean_full;
  verdict(7, "ablation direction", ok,
          fmt("mean F1 over 3 seeds: full %.3f, no SAM %.3f, no TAM %.3f", mean_full, mean_no_sam,
              mean_no_tam));
}

// ---------------------------------------------------------------- criterion 8

double best_window_seconds(std::size_t n, std::size_t f_m, std::size_t f_l, std::size_t f_s) {
  std::mt19937_64 rng(808);
  std::vector<std::uint8_t> adj(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    adj[i * n + i] = 1;
    adj[i * n + (i + 1) % n] = 1;
  }
  ModelConfig mc;
  mc.n = n;
  mc.f_m = f_m;
  mc.f_l = f_l;
  mc.f_s = f_s;
  mc.seed = 808;
  Model model(mc, GraphTopology::from_adjacency(adj, n));
  GraphSeries series = random_series(rng, n, mc.window, f_m, f_l, f_s, adj);
  std::vector<WindowSample> window{{mc.window - 1, mc.window, std::vector<int>(n, -1)}};
  double best = 1e300;
  for (int rep = 0; rep < 3; ++rep) {
    auto t0 = std::chrono::steady_clock::now();
    score_stream(model, series, window);
    best = std::min(best, seconds_since(t0));
  }
  return best;
}

void criterion_realtime() {
  double aiops = best_window_seconds(40, 25, 12, 4);
  double msds = best_window_seconds(5, 4, 7, 2);
  bool ok = aiops < 1.0 && msds < 0.030;
  verdict(8, "real-time scoring bound", ok,
          fmt("one window: N=40 F_m=25 in %.3fs (< 1s), N=5 in %.1fms (< 30ms)", aiops,
              msds * 1000.0));
}

// ---------------------------------------------------------------- criterion 9

void criterion_preprocessing() {
  bool ok = true;
  std::ostringstream why;
  std::mt19937_64 rng(909);

  // Min-max outputs (metrics and log counts) live in [0, 1] on the data the
  // stats were fit on; traces are mean-normalized and unbounded.
  {
    SynthConfig sc;
    sc.seed = 17;
    sc.t = 300;
    SynthDataset data = generate(sc);
    auto templates = mine_log_templates(data.logs);
    std::vector<std::string> rtypes;
    for (const auto& s : data.spans)
      if (std::find(rtypes.begin(), rtypes.end(), s.request_type) == rtypes.end())
        rtypes.push_back(s.request_type);
    std::sort(rtypes.begin(), rtypes.end());
    TelemetrySeries series = bucket(data.metrics, data.logs, data.spans, sc.interval,
                                    data.instances, rtypes, templates);
    NormalizationStats stats = fit_normalization(series);
    normalize(series, stats);
    double lo = 1e300, hi = -1e300;
    for (const auto* vec : {&series.metrics, &series.logs})
      for (double v : *vec) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    if (lo < 0.0 || hi > 1.0) {
      ok = false;
      why << "normalized range [" << lo << ", " << hi << "]; ";
    }
  }

  // Span bucketing equals a brute-force groupby-sum on 1,000 random spans.
  {
    std::vector<std::string> instances = {"a", "b", "c", "d"};
    std::vector<std::string> rtypes = {"r0", "r1"};
    std::uniform_int_distribution<std::size_t> pick_i(0, 3), pick_r(0, 1);
    std::uniform_int_distribution<std::int64_t> pick_ts(0, 599);
    std::uniform_real_distribution<double> pick_d(1.0, 50.0);
    std::vector<SpanRecord> spans;
    std::vector<double> expected(10 * 4 * 4 * 2, 0.0);
    for (int i = 0; i < 1000; ++i) {
      SpanRecord s;
      s.trace_id = "t" + std::to_string(i);
      s.span_id = "s" + std::to_string(i);
      s.request_type = rtypes[pick_r(rng)];
      s.caller_instance = instances[pick_i(rng)];
      s.callee_instance = instances[pick_i(rng)];
      s.start_ts = pick_ts(rng);
      s.duration_ms = pick_d(rng);
      s.finished = true;
      spans.push_back(s);
      std::size_t t = std::size_t(s.start_ts / 60);
      std::size_t ci = std::size_t(&*std::find(instances.begin(), instances.end(),
                                               s.caller_instance) -
                                   instances.data());
      std::size_t cj = std::size_t(&*std::find(instances.begin(), instances.end(),
                                               s.callee_instance) -
                                   instances.data());
      std::size_t rt = s.request_type == "r0" ? 0 : 1;
      expected[((t * 4 + ci) * 4 + cj) * 2 + rt] += s.duration_ms;
    }
    std::vector<MetricRecord> metrics;
    for (std::int64_t ts = 0; ts < 600; ts += 60)
      for (const auto& inst : instances) metrics.push_back({ts, inst, {0.0}});
    TelemetrySeries series = bucket(metrics, {}, spans, 60, instances, rtypes, {});
    double worst = 0.0;
    for (std::size_t i = 0; i < expected.size(); ++i)
      worst = std::max(worst, std::abs(series.spans[i] - expected[i]));
    if (worst != 0.0) {
      ok = false;
      why << "span groupby max |err| " << worst << "; ";
    }
  }

  // Template mining is deterministic: two runs serialize byte-equal.
  {
    SynthConfig sc;
    sc.seed = 23;
    sc.t = 200;
    SynthDataset data = generate(sc);
    auto serialize = [](const std::vector<LogTemplate>& ts) {
      std::ostringstream out;
      for (const auto& t : ts) {
        out << t.template_id;
        for (const auto& tok : t.tokens) out << '\x1f' << tok;
        out << '\n';
      }
      return out.str();
    };
    std::string a = serialize(mine_log_templates(data.logs));
    std::string b = serialize(mine_log_templates(data.logs));
    if (a != b) {
      ok = false;
      why << "template miner runs differ; ";
    }
  }

  if (ok)
    why << "min-max in [0,1], 1000-span groupby exact, template mining byte-stable";
  verdict(9, "preprocessing correctness", ok, why.str());
}

}  // namespace

int main() {
  criterion_gradients();
  criterion_attention_invariants();
  criterion_oracles();
  criterion_loss_formulas();
  criterion_synth_detection();
  criterion_semi_supervision();
  criterion_ablation();
  criterion_realtime();
  criterion_preprocessing();
  std::printf("%d of 9 criteria failed\n", g_failed);
  return g_failed;
}
