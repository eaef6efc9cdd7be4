#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace mstgad {

struct MetricRecord {
  std::int64_t timestamp = 0;
  std::string instance_id;
  std::vector<double> values;
};

struct LogRecord {
  std::int64_t timestamp = 0;
  std::string instance_id;
  std::string message;
};

inline constexpr const char* kWildcard = "<*>";

struct LogTemplate {
  int template_id = 0;
  std::vector<std::string> tokens;  // literal or kWildcard
  std::string joined() const;
};

struct SpanRecord {
  std::string trace_id;
  std::string span_id;
  std::string parent_span_id;
  std::string request_type;
  std::string caller_instance;  // may be empty; resolved via parent span
  std::string callee_instance;
  std::int64_t start_ts = 0;
  double duration_ms = 0.0;
  bool finished = true;
};

struct MinerConfig {
  int depth = 4;                 // parse-tree depth incl. root and leaf
  double similarity_threshold = 0.4;
  int max_children = 100;
};

// Streaming fixed-depth parse-tree template miner (Drain-style). Messages
// are routed by token count, then by leading tokens, then clustered by
// token-wise similarity at the leaves. Mining is order-sensitive and
// deterministic.
class TemplateMiner {
 public:
  explicit TemplateMiner(MinerConfig cfg = {});
  ~TemplateMiner();
  TemplateMiner(TemplateMiner&&) noexcept;
  TemplateMiner& operator=(TemplateMiner&&) noexcept;

  // Routes a message to its cluster, creating or generalizing a template
  // as needed. Returns the template id.
  int add_message(const std::string& message);
  std::vector<LogTemplate> templates() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::vector<std::string> tokenize_log(const std::string& message);

std::vector<LogTemplate> mine_log_templates(const std::vector<LogRecord>& logs,
                                            const MinerConfig& cfg = {});

// Best-matching template id, or unknown_template_id(templates) when no
// template reaches the similarity threshold. Wildcards match any token.
int match_template(const std::string& message, const std::vector<LogTemplate>& templates,
                   double similarity_threshold = 0.4);
inline int unknown_template_id(const std::vector<LogTemplate>& templates) {
  return static_cast<int>(templates.size());
}

struct NormalizationStats {
  std::vector<double> metric_min, metric_max;
  std::vector<double> log_min, log_max;
  std::vector<double> trace_mean;
  double epsilon = 1e-8;
  // Metric columns (indices into the pre-filter schema) kept by the
  // variance filter; identity when no filtering was applied.
  std::vector<std::size_t> kept_metric_columns;
};

// Aligned per-timestamp tensors for all three modalities. Log features are
// template counts plus one trailing unknown-template column.
struct TelemetrySeries {
  std::vector<std::int64_t> timestamps;  // strictly increasing, uniform interval
  std::int64_t interval = 1;
  std::vector<std::string> instances;
  std::vector<std::string> request_types;
  std::size_t f_m = 0;
  std::size_t f_l = 0;
  std::vector<double> metrics;  // T x N x f_m
  std::vector<double> logs;     // T x N x f_l
  std::vector<double> spans;    // T x N x N x f_s

  std::size_t t_count() const { return timestamps.size(); }
  std::size_t n() const { return instances.size(); }
  std::size_t f_s() const { return request_types.size(); }

  double& m(std::size_t t, std::size_t i, std::size_t f) {
    return metrics[(t * n() + i) * f_m + f];
  }
  double m(std::size_t t, std::size_t i, std::size_t f) const {
    return metrics[(t * n() + i) * f_m + f];
  }
  double& l(std::size_t t, std::size_t i, std::size_t f) { return logs[(t * n() + i) * f_l + f]; }
  double l(std::size_t t, std::size_t i, std::size_t f) const {
    return logs[(t * n() + i) * f_l + f];
  }
  double& s(std::size_t t, std::size_t i, std::size_t j, std::size_t r) {
    return spans[((t * n() + i) * n() + j) * f_s() + r];
  }
  double s(std::size_t t, std::size_t i, std::size_t j, std::size_t r) const {
    return spans[((t * n() + i) * n() + j) * f_s() + r];
  }
};

struct BucketReport {
  std::size_t rejected_unknown_instance = 0;
  std::size_t dropped_unresolved_caller = 0;
  std::size_t skipped_unfinished_spans = 0;
  std::size_t unknown_template_logs = 0;
};

// Buckets raw records into a per-interval series. Metrics use
// last-observation-carried-forward per instance (zero before the first
// observation); logs count template matches; span durations are summed by
// (caller, callee, request type) on the start timestamp's bucket.
TelemetrySeries bucket(const std::vector<MetricRecord>& metric_records,
                       const std::vector<LogRecord>& log_records,
                       const std::vector<SpanRecord>& span_records, std::int64_t interval,
                       std::vector<std::string> instances,
                       std::vector<std::string> request_types,
                       const std::vector<LogTemplate>& templates,
                       double match_threshold = 0.4, BucketReport* report = nullptr);

// Drops metric columns whose variance over all (t, i) is <= threshold.
// Returns the kept original column indices (also recorded later in the
// normalization stats). Throws if nothing survives.
std::vector<std::size_t> filter_low_variance_metrics(TelemetrySeries& series, double threshold);

// Projects a series onto a previously recorded kept-column map.
void apply_metric_filter(TelemetrySeries& series, const std::vector<std::size_t>& kept);

NormalizationStats fit_normalization(const TelemetrySeries& train, double epsilon = 1e-8);
void normalize(TelemetrySeries& series, const NormalizationStats& stats);

}  // namespace mstgad
