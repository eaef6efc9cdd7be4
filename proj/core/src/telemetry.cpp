#include "mstgad/telemetry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace mstgad {

namespace {

std::unordered_map<std::string, std::size_t> index_of(const std::vector<std::string>& names) {
  std::unordered_map<std::string, std::size_t> map;
  for (std::size_t i = 0; i < names.size(); ++i) map[names[i]] = i;
  return map;
}

}  // namespace

TelemetrySeries bucket(const std::vector<MetricRecord>& metric_records,
                       const std::vector<LogRecord>& log_records,
                       const std::vector<SpanRecord>& span_records, std::int64_t interval,
                       std::vector<std::string> instances,
                       std::vector<std::string> request_types,
                       const std::vector<LogTemplate>& templates, double match_threshold,
                       BucketReport* report) {
  if (interval <= 0) throw std::invalid_argument("bucket: interval must be positive");
  BucketReport local;
  BucketReport& rep = report ? *report : local;

  std::int64_t lo = std::numeric_limits<std::int64_t>::max();
  std::int64_t hi = std::numeric_limits<std::int64_t>::min();
  auto widen = [&](std::int64_t ts) {
    lo = std::min(lo, ts);
    hi = std::max(hi, ts);
  };
  for (const auto& r : metric_records) widen(r.timestamp);
  for (const auto& r : log_records) widen(r.timestamp);
  for (const auto& r : span_records)
    if (r.finished) widen(r.start_ts);
  if (lo > hi) lo = hi = 0;  // empty input: one empty bucket

  std::int64_t t0 = lo - (lo % interval + interval) % interval;  // floor to interval
  std::size_t t_count = std::size_t((hi - t0) / interval) + 1;

  TelemetrySeries series;
  series.interval = interval;
  series.instances = std::move(instances);
  series.request_types = std::move(request_types);
  std::size_t n = series.n();
  series.f_m = metric_records.empty() ? 0 : metric_records.front().values.size();
  series.f_l = templates.size() + 1;  // trailing unknown-template column
  series.timestamps.resize(t_count);
  for (std::size_t t = 0; t < t_count; ++t)
    series.timestamps[t] = t0 + std::int64_t(t) * interval;
  series.metrics.assign(t_count * n * series.f_m, 0.0);
  series.logs.assign(t_count * n * series.f_l, 0.0);
  series.spans.assign(t_count * n * n * series.f_s(), 0.0);

  auto inst_idx = index_of(series.instances);
  auto rtype_idx = index_of(series.request_types);
  auto bucket_of = [&](std::int64_t ts) { return std::size_t((ts - t0) / interval); };

  // Metrics: keep the latest observation per (bucket, instance), then carry
  // forward across buckets.
  std::vector<std::int64_t> last_seen(t_count * n, std::numeric_limits<std::int64_t>::min());
  std::vector<std::uint8_t> observed(t_count * n, 0);
  for (const auto& r : metric_records) {
    auto it = inst_idx.find(r.instance_id);
    if (it == inst_idx.end()) {
      ++rep.rejected_unknown_instance;
      continue;
    }
    if (r.values.size() != series.f_m)
      throw std::invalid_argument("bucket: metric record width " +
                                  std::to_string(r.values.size()) + " != schema width " +
                                  std::to_string(series.f_m));
    std::size_t t = bucket_of(r.timestamp), i = it->second;
    if (r.timestamp >= last_seen[t * n + i]) {
      last_seen[t * n + i] = r.timestamp;
      observed[t * n + i] = 1;
      for (std::size_t f = 0; f < series.f_m; ++f) series.m(t, i, f) = r.values[f];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    bool have = false;
    std::vector<double> carry(series.f_m, 0.0);
    for (std::size_t t = 0; t < t_count; ++t) {
      if (observed[t * n + i]) {
        have = true;
        for (std::size_t f = 0; f < series.f_m; ++f) carry[f] = series.m(t, i, f);
      } else if (have) {
        for (std::size_t f = 0; f < series.f_m; ++f) series.m(t, i, f) = carry[f];
      }
    }
  }

  for (const auto& r : log_records) {
    auto it = inst_idx.find(r.instance_id);
    if (it == inst_idx.end()) {
      ++rep.rejected_unknown_instance;
      continue;
    }
    int tid = match_template(r.message, templates, match_threshold);
    if (tid == unknown_template_id(templates)) ++rep.unknown_template_logs;
    series.l(bucket_of(r.timestamp), it->second, std::size_t(tid)) += 1.0;
  }

  // Spans: resolve missing callers through the parent span, then sum
  // finished durations by (caller, callee, request type).
  std::unordered_map<std::string, const SpanRecord*> by_span_id;
  for (const auto& r : span_records)
    if (!r.span_id.empty()) by_span_id[r.span_id] = &r;
  for (const auto& r : span_records) {
    if (!r.finished) {
      ++rep.skipped_unfinished_spans;
      continue;
    }
    std::string caller = r.caller_instance;
    if (caller.empty() && !r.parent_span_id.empty()) {
      auto pit = by_span_id.find(r.parent_span_id);
      if (pit != by_span_id.end()) caller = pit->second->callee_instance;
    }
    if (caller.empty()) {
      ++rep.dropped_unresolved_caller;
      continue;
    }
    auto ci = inst_idx.find(caller);
    auto cj = inst_idx.find(r.callee_instance);
    auto rt = rtype_idx.find(r.request_type);
    if (ci == inst_idx.end() || cj == inst_idx.end()) {
      ++rep.rejected_unknown_instance;
      continue;
    }
    if (rt == rtype_idx.end()) {
      ++rep.rejected_unknown_instance;
      continue;
    }
    series.s(bucket_of(r.start_ts), ci->second, cj->second, rt->second) += r.duration_ms;
  }
  return series;
}

std::vector<std::size_t> filter_low_variance_metrics(TelemetrySeries& series,
                                                     double threshold) {
  if (threshold < 0) throw std::invalid_argument("variance threshold must be >= 0");
  std::size_t rows = series.t_count() * series.n();
  std::vector<std::size_t> kept;
  for (std::size_t f = 0; f < series.f_m; ++f) {
    double mean = 0.0;
    for (std::size_t r = 0; r < rows; ++r) mean += series.metrics[r * series.f_m + f];
    mean /= double(rows);
    double var = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      double d = series.metrics[r * series.f_m + f] - mean;
      var += d * d;
    }
    var /= double(rows);
    if (var > threshold) kept.push_back(f);
  }
  if (kept.empty())
    throw std::runtime_error("filter_low_variance_metrics: all metric columns removed");
  apply_metric_filter(series, kept);
  return kept;
}

void apply_metric_filter(TelemetrySeries& series, const std::vector<std::size_t>& kept) {
  for (std::size_t f : kept)
    if (f >= series.f_m)
      throw std::invalid_argument("apply_metric_filter: column index out of range");
  std::size_t rows = series.t_count() * series.n();
  std::vector<double> filtered(rows * kept.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = 0; k < kept.size(); ++k)
      filtered[r * kept.size() + k] = series.metrics[r * series.f_m + kept[k]];
  series.metrics = std::move(filtered);
  series.f_m = kept.size();
}

NormalizationStats fit_normalization(const TelemetrySeries& train, double epsilon) {
  if (train.t_count() == 0) throw std::invalid_argument("fit_normalization: empty series");
  if (epsilon <= 0) throw std::invalid_argument("fit_normalization: epsilon must be > 0");
  NormalizationStats stats;
  stats.epsilon = epsilon;
  stats.kept_metric_columns.resize(train.f_m);
  for (std::size_t f = 0; f < train.f_m; ++f) stats.kept_metric_columns[f] = f;

  std::size_t rows = train.t_count() * train.n();
  auto minmax = [rows](const std::vector<double>& data, std::size_t width,
                       std::vector<double>& mins, std::vector<double>& maxs) {
    mins.assign(width, std::numeric_limits<double>::infinity());
    maxs.assign(width, -std::numeric_limits<double>::infinity());
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t f = 0; f < width; ++f) {
        double v = data[r * width + f];
        mins[f] = std::min(mins[f], v);
        maxs[f] = std::max(maxs[f], v);
      }
    if (rows == 0) {
      mins.assign(width, 0.0);
      maxs.assign(width, 0.0);
    }
  };
  minmax(train.metrics, train.f_m, stats.metric_min, stats.metric_max);
  minmax(train.logs, train.f_l, stats.log_min, stats.log_max);

  // Trace mean over all (t, i, j) entries, zeros included.
  std::size_t fs = train.f_s();
  stats.trace_mean.assign(fs, 0.0);
  std::size_t cells = train.t_count() * train.n() * train.n();
  for (std::size_t c = 0; c < cells; ++c)
    for (std::size_t r = 0; r < fs; ++r) stats.trace_mean[r] += train.spans[c * fs + r];
  for (std::size_t r = 0; r < fs; ++r)
    if (cells > 0) stats.trace_mean[r] /= double(cells);
  return stats;
}

void normalize(TelemetrySeries& series, const NormalizationStats& stats) {
  if (stats.metric_min.size() != series.f_m || stats.log_min.size() != series.f_l ||
      stats.trace_mean.size() != series.f_s())
    throw std::invalid_argument("normalize: stats schema does not match series shape");
  double eps = stats.epsilon;
  std::size_t rows = series.t_count() * series.n();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t f = 0; f < series.f_m; ++f) {
      double& v = series.metrics[r * series.f_m + f];
      v = (v - stats.metric_min[f]) / (stats.metric_max[f] - stats.metric_min[f] + eps);
    }
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t f = 0; f < series.f_l; ++f) {
      double& v = series.logs[r * series.f_l + f];
      v = (v - stats.log_min[f]) / (stats.log_max[f] - stats.log_min[f] + eps);
    }
  std::size_t fs = series.f_s();
  std::size_t cells = series.t_count() * series.n() * series.n();
  for (std::size_t c = 0; c < cells; ++c)
    for (std::size_t r = 0; r < fs; ++r)
      series.spans[c * fs + r] /= (stats.trace_mean[r] + eps);
}

}  // namespace mstgad
