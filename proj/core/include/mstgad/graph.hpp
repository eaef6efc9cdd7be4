#pragma once

#include <cstdint>
#include <vector>

#include "mstgad/telemetry.hpp"

namespace mstgad {

// One timestamp's twin graph. Node features are the concatenation of
// metric and log features; the split point (f_m) is kept so the model can
// embed modalities separately. Edge features are dense N x N x F_s, zero
// wherever the adjacency is zero.
struct MstGraph {
  std::int64_t timestamp = 0;
  std::size_t index = 0;  // position in the series
  std::size_t n = 0, f_m = 0, f_l = 0, f_s = 0;
  std::vector<double> node_features;  // N x (f_m + f_l)
  std::vector<double> edge_features;  // N x N x f_s

  double node(std::size_t i, std::size_t f) const {
    return node_features[i * (f_m + f_l) + f];
  }
  double edge(std::size_t i, std::size_t j, std::size_t r) const {
    return edge_features[(i * n + j) * f_s + r];
  }
};

struct GraphSeries {
  std::vector<std::uint8_t> adjacency;  // N x N, self-loops set
  std::vector<MstGraph> graphs;
  std::size_t masked_edge_values = 0;  // nonzero S entries zeroed by A
};

// A[i][j] = 1 iff any span i -> j appears anywhere in the training series;
// diagonal forced to 1.
std::vector<std::uint8_t> build_adjacency(const TelemetrySeries& train);

GraphSeries build_graphs(const TelemetrySeries& series,
                         const std::vector<std::uint8_t>& adjacency);

// Sliding window of k consecutive graphs ending at `last`; labels belong to
// the final graph only. Label values: -1 unknown, 0 normal, 1 abnormal.
struct WindowSample {
  std::size_t last = 0;  // index of G_t in GraphSeries::graphs
  std::size_t k = 0;
  std::vector<int> labels;  // length N
};

std::vector<WindowSample> make_windows(const GraphSeries& series,
                                       const std::vector<std::vector<int>>& labels_per_t,
                                       std::size_t k);

}  // namespace mstgad
