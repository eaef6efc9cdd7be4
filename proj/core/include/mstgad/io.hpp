#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mstgad/detection.hpp"
#include "mstgad/graph.hpp"
#include "mstgad/network.hpp"
#include "mstgad/synth.hpp"
#include "mstgad/telemetry.hpp"
#include "mstgad/training.hpp"

namespace mstgad {

// All readers throw std::runtime_error naming the path when a file is
// missing or malformed. Writers create/truncate their target.

struct MetricsFile {
  std::vector<std::string> columns;  // metric names, order = value order
  std::vector<MetricRecord> records;
};

// CSV: timestamp,instance,<metric_0>,...
MetricsFile read_metrics_csv(const std::string& path);
void write_metrics_csv(const std::string& path, const MetricsFile& file);

// JSONL: {"ts":..,"instance":"..","message":".."}
std::vector<LogRecord> read_logs_jsonl(const std::string& path);
void write_logs_jsonl(const std::string& path, const std::vector<LogRecord>& logs);

// JSONL: {"trace_id","span_id","parent_span_id","request_type","caller",
//         "callee","start_ts","duration_ms","finished"}
std::vector<SpanRecord> read_spans_jsonl(const std::string& path);
void write_spans_jsonl(const std::string& path, const std::vector<SpanRecord>& spans);

// CSV: timestamp,instance,label  (label in {-1,0,1})
std::vector<LabelRecord> read_labels_csv(const std::string& path);
void write_labels_csv(const std::string& path, const std::vector<LabelRecord>& labels);

// JSON: [{"id":0,"tokens":["..."]}]
std::vector<LogTemplate> read_templates_json(const std::string& path);
void write_templates_json(const std::string& path, const std::vector<LogTemplate>& templates);

// JSON: injected ground-truth events.
void write_truth_json(const std::string& path, const std::vector<InjectedEvent>& events);
std::vector<InjectedEvent> read_truth_json(const std::string& path);

// CSV: timestamp,instance,re,p_abnormal,decided
void write_decisions_csv(const std::string& path, const std::vector<Decision>& decisions,
                         const std::vector<std::string>& instances);
struct DecisionRow {
  std::int64_t timestamp = 0;
  std::string instance;
  double re = 0.0;
  double p_abnormal = 0.0;
  int decided = 0;
};
std::vector<DecisionRow> read_decisions_csv(const std::string& path);

void write_metrics_json(const std::string& path, const MetricsReport& report);
MetricsReport read_metrics_json(const std::string& path);

// CSV: epoch,train_loss,val_loss,lr
void write_history_csv(const std::string& path, const std::vector<HistoryRow>& history);

// Preprocessed dataset: <prefix>.json manifest + <prefix>.bin raw
// little-endian doubles (metric, log, span tensors back to back).
struct Dataset {
  TelemetrySeries series;  // normalized
  NormalizationStats stats;
  std::vector<std::uint8_t> adjacency;
  std::vector<std::vector<int>> labels;  // T x N
};
void save_dataset(const std::string& prefix, const Dataset& dataset);
Dataset load_dataset(const std::string& prefix);

// Checkpoint: <prefix>.json manifest (config, topology, parameter shapes)
// + <prefix>.bin parameter blob. Round trips are bit-exact; loading
// validates every shape against the manifest.
void save_checkpoint(const std::string& prefix, const Model& model);
Model load_checkpoint(const std::string& prefix);

}  // namespace mstgad
