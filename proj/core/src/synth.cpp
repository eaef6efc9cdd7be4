#include "mstgad/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace mstgad {

std::string to_string(AnomalyKind kind) {
  switch (kind) {
    case AnomalyKind::cpu_spike: return "cpu_spike";
    case AnomalyKind::log_burst: return "log_burst";
    case AnomalyKind::latency_inflation: return "latency_inflation";
    case AnomalyKind::silent_service: return "silent_service";
  }
  throw std::invalid_argument("unknown anomaly kind");
}

AnomalyKind anomaly_kind_from_string(const std::string& name) {
  if (name == "cpu_spike") return AnomalyKind::cpu_spike;
  if (name == "log_burst") return AnomalyKind::log_burst;
  if (name == "latency_inflation") return AnomalyKind::latency_inflation;
  if (name == "silent_service") return AnomalyKind::silent_service;
  throw std::invalid_argument("unknown anomaly kind: " + name);
}

void SynthConfig::validate() const {
  if (n < 2) throw std::invalid_argument("SynthConfig: need at least 2 instances");
  if (anomaly_rate < 0.0 || anomaly_rate > 0.5)
    throw std::invalid_argument("SynthConfig: anomaly_rate must be in [0, 0.5]");
  if (label_known_fraction < 0.0 || label_known_fraction > 1.0)
    throw std::invalid_argument("SynthConfig: label_known_fraction must be in [0, 1]");
  if (t < 1 || f_m < 1 || template_vocab < 1 || request_types < 1 || interval < 1)
    throw std::invalid_argument("SynthConfig: dimensions must be positive");
  if (edge_probability < 0.0 || edge_probability > 1.0)
    throw std::invalid_argument("SynthConfig: edge_probability must be in [0, 1]");
}

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t salt) {
  return std::mt19937_64(seed * 0x9e3779b97f4a7c15ULL + salt);
}

std::string instance_name(std::size_t i) {
  std::string s = std::to_string(i);
  return "svc-" + std::string(s.size() < 2 ? 2 - s.size() : 0, '0') + s;
}

const char* kLogSkeletons[] = {
    "Handled request %ID% in %MS% ms",
    "Cache lookup for key %ID% missed after %MS% us",
    "Scheduled background job %ID% with delay %MS% s",
    "Connection pool acquired socket %ID% (%MS% waiting)",
    "Retrying upstream call %ID%, attempt %MS%",
    "Flushed %MS% records for partition %ID%",
    "Health probe %ID% completed with status %MS%",
    "Garbage collection pass %ID% freed %MS% kb",
};

std::string render_log(std::size_t skeleton, std::uint64_t id, std::uint64_t ms) {
  std::string s = kLogSkeletons[skeleton % (sizeof(kLogSkeletons) / sizeof(char*))];
  auto replace = [&](const std::string& slot, const std::string& value) {
    auto pos = s.find(slot);
    if (pos != std::string::npos) s.replace(pos, slot.size(), value);
  };
  replace("%ID%", std::to_string(id));
  replace("%MS%", std::to_string(ms));
  return s;
}

}  // namespace

SynthDataset generate(const SynthConfig& cfg) {
  cfg.validate();
  SynthDataset out;
  for (std::size_t i = 0; i < cfg.n; ++i) out.instances.push_back(instance_name(i));

  std::mt19937_64 topo_rng = stream(cfg.seed, 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < cfg.n; ++i)
    for (std::size_t j = i + 1; j < cfg.n; ++j)
      if (unit(topo_rng) < cfg.edge_probability) out.dag_edges.push_back({i, j});

  bool wants_latency = std::find(cfg.anomaly_kinds.begin(), cfg.anomaly_kinds.end(),
                                 AnomalyKind::latency_inflation) != cfg.anomaly_kinds.end();
  if (out.dag_edges.empty() && wants_latency && cfg.anomaly_rate > 0.0)
    throw std::invalid_argument(
        "generate: latency_inflation requested but the sampled DAG has no edges; raise "
        "edge_probability");

  // Injected events: contiguous per-instance intervals until the target
  // number of anomalous instance-timestamps is covered.
  out.truth.assign(cfg.t, std::vector<int>(cfg.n, 0));
  std::vector<std::vector<const InjectedEvent*>> active;  // filled after events are final
  if (cfg.anomaly_rate > 0.0 && !cfg.anomaly_kinds.empty()) {
    std::mt19937_64 ev_rng = stream(cfg.seed, 2);
    std::size_t target = std::size_t(cfg.anomaly_rate * double(cfg.t * cfg.n) + 0.5);
    std::size_t covered = 0;
    std::size_t kind_cursor = 0;
    std::uniform_int_distribution<std::size_t> pick_instance(0, cfg.n - 1);
    std::uniform_int_distribution<std::size_t> pick_len(5, 15);
    std::size_t guard = 0;
    while (covered < target && guard++ < 100000) {
      std::size_t len = std::min(pick_len(ev_rng), target - covered);
      len = std::max<std::size_t>(len, 1);
      if (len > cfg.t) len = cfg.t;
      std::size_t t0 = std::uniform_int_distribution<std::size_t>(0, cfg.t - len)(ev_rng);
      std::size_t inst = pick_instance(ev_rng);
      AnomalyKind kind = cfg.anomaly_kinds[kind_cursor++ % cfg.anomaly_kinds.size()];
      if (kind == AnomalyKind::latency_inflation && out.dag_edges.empty()) continue;
      InjectedEvent ev;
      ev.start_ts = std::int64_t(t0) * cfg.interval;
      ev.end_ts = std::int64_t(t0 + len - 1) * cfg.interval;
      ev.kind = kind;
      ev.instances.push_back(out.instances[inst]);
      out.events.push_back(ev);
      for (std::size_t p = t0; p < t0 + len; ++p)
        if (!out.truth[p][inst]) {
          out.truth[p][inst] = 1;
          ++covered;
        }
    }
  }

  auto kind_active = [&](std::size_t t, std::size_t inst, AnomalyKind kind) {
    std::int64_t ts = std::int64_t(t) * cfg.interval;
    for (const auto& ev : out.events)
      if (ev.kind == kind && ts >= ev.start_ts && ts <= ev.end_ts &&
          ev.instances[0] == out.instances[inst])
        return true;
    return false;
  };

  // Metrics: seasonal baseline + noise; cpu_spike lifts far outside range,
  // silent_service flat-lines near zero.
  {
    std::mt19937_64 rng = stream(cfg.seed, 3);
    std::vector<double> base(cfg.n * cfg.f_m), amp(cfg.n * cfg.f_m), period(cfg.n * cfg.f_m),
        phase(cfg.n * cfg.f_m);
    for (std::size_t i = 0; i < base.size(); ++i) {
      base[i] = 0.3 + 0.4 * unit(rng);
      amp[i] = 0.1 + 0.1 * unit(rng);
      period[i] = 50.0 + 100.0 * unit(rng);
      phase[i] = 6.28318530717958648 * unit(rng);
    }
    std::normal_distribution<double> noise(0.0, 0.02);
    for (std::size_t t = 0; t < cfg.t; ++t)
      for (std::size_t i = 0; i < cfg.n; ++i) {
        MetricRecord rec;
        rec.timestamp = std::int64_t(t) * cfg.interval;
        rec.instance_id = out.instances[i];
        rec.values.resize(cfg.f_m);
        bool spike = kind_active(t, i, AnomalyKind::cpu_spike);
        bool silent = kind_active(t, i, AnomalyKind::silent_service);
        for (std::size_t f = 0; f < cfg.f_m; ++f) {
          std::size_t c = i * cfg.f_m + f;
          double v = base[c] +
                     amp[c] * std::sin(6.28318530717958648 * double(t) / period[c] + phase[c]) +
                     noise(rng);
          if (spike) v = base[c] + cfg.anomaly_magnitude * amp[c];
          if (silent) v = 0.01;
          rec.values[f] = v;
        }
        out.metrics.push_back(std::move(rec));
      }
  }

  // Logs: Poisson emissions per template; log_burst adds extra emissions
  // from a separate stream so baselines stay byte-identical.
  {
    std::mt19937_64 rng = stream(cfg.seed, 4);
    std::mt19937_64 burst_rng = stream(cfg.seed, 5);
    std::vector<double> rate(cfg.n * cfg.template_vocab);
    for (auto& r : rate) r = 0.2 + 0.8 * unit(rng);
    std::uniform_int_distribution<std::uint64_t> vary(1, 99999);
    for (std::size_t t = 0; t < cfg.t; ++t)
      for (std::size_t i = 0; i < cfg.n; ++i) {
        bool burst = kind_active(t, i, AnomalyKind::log_burst);
        bool silent = kind_active(t, i, AnomalyKind::silent_service);
        for (std::size_t v = 0; v < cfg.template_vocab; ++v) {
          double lambda = rate[i * cfg.template_vocab + v];
          std::size_t count = std::poisson_distribution<std::size_t>(lambda)(rng);
          std::uint64_t id = vary(rng), ms = vary(rng);
          if (silent) continue;
          for (std::size_t c = 0; c < count; ++c)
            out.logs.push_back({std::int64_t(t) * cfg.interval, out.instances[i],
                                render_log(v, id + c, ms + 7 * c)});
          if (burst) {
            double extra = lambda * (cfg.anomaly_magnitude - 1.0);
            std::size_t more = std::poisson_distribution<std::size_t>(extra)(burst_rng);
            for (std::size_t c = 0; c < more; ++c)
              out.logs.push_back({std::int64_t(t) * cfg.interval, out.instances[i],
                                  render_log(v, id + 1000 + c, ms + 13 * c)});
          }
        }
      }
  }

  // Spans: log-normal durations along DAG edges; latency_inflation scales
  // durations in place so record counts and ids stay identical.
  {
    std::mt19937_64 rng = stream(cfg.seed, 6);
    std::vector<double> base_ms(out.dag_edges.size() * cfg.request_types);
    for (auto& b : base_ms) b = 20.0 + 60.0 * unit(rng);
    std::uint64_t span_counter = 0;
    for (std::size_t t = 0; t < cfg.t; ++t)
      for (std::size_t e = 0; e < out.dag_edges.size(); ++e) {
        auto [src, dst] = out.dag_edges[e];
        for (std::size_t r = 0; r < cfg.request_types; ++r) {
          std::size_t count = std::poisson_distribution<std::size_t>(1.5)(rng);
          for (std::size_t c = 0; c < count; ++c) {
            double sigma = 0.25;
            double mu = std::log(base_ms[e * cfg.request_types + r]);
            double dur = std::exp(mu + sigma * std::normal_distribution<double>(0, 1)(rng));
            bool inflate = kind_active(t, src, AnomalyKind::latency_inflation) ||
                           kind_active(t, dst, AnomalyKind::latency_inflation);
            bool silent = kind_active(t, src, AnomalyKind::silent_service) ||
                          kind_active(t, dst, AnomalyKind::silent_service);
            if (silent) {
              ++span_counter;
              continue;
            }
            if (inflate) dur *= cfg.anomaly_magnitude;
            SpanRecord span;
            span.trace_id = "trace-" + std::to_string(span_counter);
            span.span_id = "span-" + std::to_string(span_counter);
            ++span_counter;
            span.request_type = "rt" + std::to_string(r);
            span.caller_instance = out.instances[src];
            span.callee_instance = out.instances[dst];
            span.start_ts = std::int64_t(t) * cfg.interval;
            span.duration_ms = dur;
            span.finished = true;
            out.spans.push_back(std::move(span));
          }
        }
      }
  }

  // Labels: ground truth masked down to label_known_fraction.
  {
    std::mt19937_64 rng = stream(cfg.seed, 7);
    for (std::size_t t = 0; t < cfg.t; ++t)
      for (std::size_t i = 0; i < cfg.n; ++i) {
        int label = unit(rng) < cfg.label_known_fraction ? out.truth[t][i] : -1;
        out.labels.push_back({std::int64_t(t) * cfg.interval, out.instances[i], label});
      }
  }
  return out;
}

}  // namespace mstgad
