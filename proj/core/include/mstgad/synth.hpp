#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mstgad/telemetry.hpp"

namespace mstgad {

enum class AnomalyKind { cpu_spike, log_burst, latency_inflation, silent_service };

std::string to_string(AnomalyKind kind);
AnomalyKind anomaly_kind_from_string(const std::string& name);

struct SynthConfig {
  std::uint64_t seed = 0;
  std::size_t n = 5;
  double edge_probability = 0.4;  // random DAG over ordered pairs i < j
  std::size_t t = 2000;
  std::int64_t interval = 60;
  std::size_t f_m = 4;
  std::size_t template_vocab = 6;
  std::size_t request_types = 2;
  double anomaly_rate = 0.03;  // fraction of instance-timestamps
  std::vector<AnomalyKind> anomaly_kinds = {AnomalyKind::cpu_spike, AnomalyKind::log_burst,
                                            AnomalyKind::latency_inflation,
                                            AnomalyKind::silent_service};
  double label_known_fraction = 0.5;
  double anomaly_magnitude = 6.0;  // 4-8x baseline scale

  void validate() const;
};

struct InjectedEvent {
  std::int64_t start_ts = 0;
  std::int64_t end_ts = 0;  // inclusive
  AnomalyKind kind = AnomalyKind::cpu_spike;
  std::vector<std::string> instances;
};

struct LabelRecord {
  std::int64_t timestamp = 0;
  std::string instance_id;
  int label = -1;
};

struct SynthDataset {
  std::vector<std::string> instances;
  std::vector<std::pair<std::size_t, std::size_t>> dag_edges;
  std::vector<MetricRecord> metrics;
  std::vector<LogRecord> logs;
  std::vector<SpanRecord> spans;
  std::vector<LabelRecord> labels;       // after label_known_fraction masking
  std::vector<std::vector<int>> truth;   // T x N unmasked ground truth in {0,1}
  std::vector<InjectedEvent> events;
};

// Deterministic for a fixed config: baselines draw from per-modality RNG
// streams so one anomaly kind never shifts another modality's output.
SynthDataset generate(const SynthConfig& cfg);

}  // namespace mstgad
