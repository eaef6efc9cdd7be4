#include "mstgad/graph.hpp"

#include <stdexcept>

namespace mstgad {

std::vector<std::uint8_t> build_adjacency(const TelemetrySeries& train) {
  std::size_t n = train.n(), fs = train.f_s();
  std::vector<std::uint8_t> adj(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) adj[i * n + i] = 1;
  for (std::size_t t = 0; t < train.t_count(); ++t)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (adj[i * n + j]) continue;
        for (std::size_t r = 0; r < fs; ++r)
          if (train.s(t, i, j, r) != 0.0) {
            adj[i * n + j] = 1;
            break;
          }
      }
  return adj;
}

GraphSeries build_graphs(const TelemetrySeries& series,
                         const std::vector<std::uint8_t>& adjacency) {
  std::size_t n = series.n();
  if (adjacency.size() != n * n)
    throw std::invalid_argument("build_graphs: adjacency size " +
                                std::to_string(adjacency.size()) + " != N*N for N=" +
                                std::to_string(n));
  GraphSeries out;
  out.adjacency = adjacency;
  std::size_t fm = series.f_m, fl = series.f_l, fs = series.f_s();
  out.graphs.reserve(series.t_count());
  for (std::size_t t = 0; t < series.t_count(); ++t) {
    MstGraph g;
    g.timestamp = series.timestamps[t];
    g.index = t;
    g.n = n;
    g.f_m = fm;
    g.f_l = fl;
    g.f_s = fs;
    g.node_features.resize(n * (fm + fl));
    g.edge_features.assign(n * n * fs, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t f = 0; f < fm; ++f) g.node_features[i * (fm + fl) + f] = series.m(t, i, f);
      for (std::size_t f = 0; f < fl; ++f)
        g.node_features[i * (fm + fl) + fm + f] = series.l(t, i, f);
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t r = 0; r < fs; ++r) {
          double v = series.s(t, i, j, r);
          if (adjacency[i * n + j])
            g.edge_features[(i * n + j) * fs + r] = v;
          else if (v != 0.0)
            ++out.masked_edge_values;
        }
    }
    out.graphs.push_back(std::move(g));
  }
  return out;
}

std::vector<WindowSample> make_windows(const GraphSeries& series,
                                       const std::vector<std::vector<int>>& labels_per_t,
                                       std::size_t k) {
  std::size_t t_count = series.graphs.size();
  if (k < 1) throw std::invalid_argument("make_windows: k must be >= 1");
  if (t_count < k)
    throw std::invalid_argument("make_windows: series length " + std::to_string(t_count) +
                                " shorter than window size " + std::to_string(k));
  if (labels_per_t.size() != t_count)
    throw std::invalid_argument("make_windows: label table length mismatch");
  std::vector<WindowSample> samples;
  samples.reserve(t_count - k + 1);
  for (std::size_t last = k - 1; last < t_count; ++last) {
    WindowSample s;
    s.last = last;
    s.k = k;
    s.labels = labels_per_t[last];
    if (s.labels.size() != series.graphs[last].n)
      throw std::invalid_argument("make_windows: label row width mismatch at t=" +
                                  std::to_string(last));
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace mstgad
