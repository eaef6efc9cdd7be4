#include <benchmark/benchmark.h>

#include <random>

#include "mstgad/detection.hpp"
#include "mstgad/graph.hpp"
#include "mstgad/network.hpp"

using namespace mstgad;

namespace {

struct Fixture {
  GraphSeries series;
  std::vector<WindowSample> windows;
  Model model;
};

std::vector<std::uint8_t> ring_adjacency(std::size_t n) {
  std::vector<std::uint8_t> a(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    a[i * n + i] = 1;
    a[i * n + (i + 1) % n] = 1;
  }
  return a;
}

Fixture make_fixture(std::size_t n, std::size_t f_m, std::size_t f_l, std::size_t f_s,
                     std::size_t k) {
  auto adj = ring_adjacency(n);
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GraphSeries series;
  series.adjacency = adj;
  for (std::size_t t = 0; t < k + 2; ++t) {
    MstGraph g;
    g.timestamp = std::int64_t(t) * 60;
    g.index = t;
    g.n = n;
    g.f_m = f_m;
    g.f_l = f_l;
    g.f_s = f_s;
    g.node_features.resize(n * (f_m + f_l));
    for (auto& v : g.node_features) v = u(rng);
    g.edge_features.assign(n * n * f_s, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (adj[i * n + j])
          for (std::size_t r = 0; r < f_s; ++r) g.edge_features[(i * n + j) * f_s + r] = u(rng);
    series.graphs.push_back(std::move(g));
  }
  ModelConfig cfg;
  cfg.d_model = 16;
  cfg.heads = 2;
  cfg.encoder_layers = 2;
  cfg.decoder_layers = 2;
  cfg.window = k;
  cfg.dropout = 0.2;
  cfg.n = n;
  cfg.f_m = f_m;
  cfg.f_l = f_l;
  cfg.f_s = f_s;
  cfg.seed = 7;
  Model model(cfg, GraphTopology::from_adjacency(adj, n));
  std::vector<std::vector<int>> labels(series.graphs.size(), std::vector<int>(n, 0));
  auto windows = make_windows(series, labels, k);
  return {std::move(series), {windows.back()}, std::move(model)};
}

void bench_window(benchmark::State& state, Fixture& fx) {
  for (auto _ : state) {
    auto scores = score_stream(fx.model, fx.series, fx.windows);
    benchmark::DoNotOptimize(scores);
  }
}

void BM_score_window_msds_scale(benchmark::State& state) {
  static Fixture fx = make_fixture(5, 4, 7, 2, 10);
  bench_window(state, fx);
}

void BM_score_window_aiops_scale(benchmark::State& state) {
  static Fixture fx = make_fixture(40, 25, 12, 4, 10);
  bench_window(state, fx);
}

}  // namespace

BENCHMARK(BM_score_window_msds_scale)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_score_window_aiops_scale)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
