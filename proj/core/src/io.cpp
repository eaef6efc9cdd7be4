#include "mstgad/io.hpp"

#include <bit>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary artifacts are little-endian");

namespace mstgad {

using nlohmann::json;

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

void write_double(std::ostream& out, double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  out << ss.str();
}

json parse_json_file(const std::string& path) {
  auto in = open_in(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

json parse_json_line(const std::string& line, const std::string& path, std::size_t lineno) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed JSON at " + path + ":" + std::to_string(lineno) +
                             ": " + e.what());
  }
}

void write_doubles(std::ostream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            std::streamsize(v.size() * sizeof(double)));
}

void read_doubles(std::istream& in, std::vector<double>& v, const std::string& path) {
  in.read(reinterpret_cast<char*>(v.data()), std::streamsize(v.size() * sizeof(double)));
  if (std::size_t(in.gcount()) != v.size() * sizeof(double))
    throw std::runtime_error("truncated binary blob: " + path);
}

}  // namespace

MetricsFile read_metrics_csv(const std::string& path) {
  auto in = open_in(path);
  MetricsFile file;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty metrics CSV: " + path);
  auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "timestamp" || header[1] != "instance")
    throw std::runtime_error("bad metrics CSV header in " + path);
  file.columns.assign(header.begin() + 2, header.end());
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw std::runtime_error("bad metrics CSV row at " + path + ":" +
                               std::to_string(lineno));
    MetricRecord rec;
    rec.timestamp = std::stoll(fields[0]);
    rec.instance_id = fields[1];
    for (std::size_t i = 2; i < fields.size(); ++i) rec.values.push_back(std::stod(fields[i]));
    file.records.push_back(std::move(rec));
  }
  return file;
}

void write_metrics_csv(const std::string& path, const MetricsFile& file) {
  auto out = open_out(path);
  out << "timestamp,instance";
  for (const auto& c : file.columns) out << "," << c;
  out << "\n";
  for (const auto& rec : file.records) {
    out << rec.timestamp << "," << rec.instance_id;
    for (double v : rec.values) {
      out << ",";
      write_double(out, v);
    }
    out << "\n";
  }
}

std::vector<LogRecord> read_logs_jsonl(const std::string& path) {
  auto in = open_in(path);
  std::vector<LogRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = parse_json_line(line, path, lineno);
    out.push_back({j.at("ts").get<std::int64_t>(), j.at("instance").get<std::string>(),
                   j.at("message").get<std::string>()});
  }
  return out;
}

void write_logs_jsonl(const std::string& path, const std::vector<LogRecord>& logs) {
  auto out = open_out(path);
  for (const auto& rec : logs) {
    json j = {{"ts", rec.timestamp}, {"instance", rec.instance_id}, {"message", rec.message}};
    out << j.dump() << "\n";
  }
}

std::vector<SpanRecord> read_spans_jsonl(const std::string& path) {
  auto in = open_in(path);
  std::vector<SpanRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = parse_json_line(line, path, lineno);
    SpanRecord s;
    s.trace_id = j.at("trace_id").get<std::string>();
    s.span_id = j.at("span_id").get<std::string>();
    s.parent_span_id = j.value("parent_span_id", "");
    s.request_type = j.at("request_type").get<std::string>();
    s.caller_instance = j.value("caller", "");
    s.callee_instance = j.at("callee").get<std::string>();
    s.start_ts = j.at("start_ts").get<std::int64_t>();
    s.duration_ms = j.at("duration_ms").get<double>();
    s.finished = j.value("finished", true);
    out.push_back(std::move(s));
  }
  return out;
}

void write_spans_jsonl(const std::string& path, const std::vector<SpanRecord>& spans) {
  auto out = open_out(path);
  for (const auto& s : spans) {
    json j = {{"trace_id", s.trace_id},
              {"span_id", s.span_id},
              {"parent_span_id", s.parent_span_id},
              {"request_type", s.request_type},
              {"caller", s.caller_instance},
              {"callee", s.callee_instance},
              {"start_ts", s.start_ts},
              {"duration_ms", s.duration_ms},
              {"finished", s.finished}};
    out << j.dump() << "\n";
  }
}

std::vector<LabelRecord> read_labels_csv(const std::string& path) {
  auto in = open_in(path);
  std::vector<LabelRecord> out;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty labels CSV: " + path);
  if (line != "timestamp,instance,label")
    throw std::runtime_error("bad labels CSV header in " + path);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 3) throw std::runtime_error("bad labels CSV row in " + path);
    out.push_back({std::stoll(fields[0]), fields[1], std::stoi(fields[2])});
  }
  return out;
}

void write_labels_csv(const std::string& path, const std::vector<LabelRecord>& labels) {
  auto out = open_out(path);
  out << "timestamp,instance,label\n";
  for (const auto& l : labels)
    out << l.timestamp << "," << l.instance_id << "," << l.label << "\n";
}

std::vector<LogTemplate> read_templates_json(const std::string& path) {
  json j = parse_json_file(path);
  std::vector<LogTemplate> out;
  for (const auto& item : j) {
    LogTemplate t;
    t.template_id = item.at("id").get<int>();
    t.tokens = item.at("tokens").get<std::vector<std::string>>();
    out.push_back(std::move(t));
  }
  return out;
}

void write_templates_json(const std::string& path, const std::vector<LogTemplate>& templates) {
  json j = json::array();
  for (const auto& t : templates) j.push_back({{"id", t.template_id}, {"tokens", t.tokens}});
  open_out(path) << j.dump(2) << "\n";
}

void write_truth_json(const std::string& path, const std::vector<InjectedEvent>& events) {
  json j = json::array();
  for (const auto& e : events)
    j.push_back({{"start_ts", e.start_ts},
                 {"end_ts", e.end_ts},
                 {"kind", to_string(e.kind)},
                 {"instances", e.instances}});
  open_out(path) << j.dump(2) << "\n";
}

std::vector<InjectedEvent> read_truth_json(const std::string& path) {
  json j = parse_json_file(path);
  std::vector<InjectedEvent> out;
  for (const auto& item : j) {
    InjectedEvent e;
    e.start_ts = item.at("start_ts").get<std::int64_t>();
    e.end_ts = item.at("end_ts").get<std::int64_t>();
    e.kind = anomaly_kind_from_string(item.at("kind").get<std::string>());
    e.instances = item.at("instances").get<std::vector<std::string>>();
    out.push_back(std::move(e));
  }
  return out;
}

void write_decisions_csv(const std::string& path, const std::vector<Decision>& decisions,
                         const std::vector<std::string>& instances) {
  auto out = open_out(path);
  out << "timestamp,instance,re,p_abnormal,decided\n";
  for (const auto& d : decisions) {
    out << d.timestamp << ","
        << (d.instance < instances.size() ? instances[d.instance]
                                          : std::to_string(d.instance))
        << ",";
    write_double(out, d.re);
    out << ",";
    write_double(out, d.p_abnormal);
    out << "," << d.decided << "\n";
  }
}

std::vector<DecisionRow> read_decisions_csv(const std::string& path) {
  auto in = open_in(path);
  std::vector<DecisionRow> out;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty decisions CSV: " + path);
  if (line != "timestamp,instance,re,p_abnormal,decided")
    throw std::runtime_error("bad decisions CSV header in " + path);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 5) throw std::runtime_error("bad decisions CSV row in " + path);
    out.push_back({std::stoll(fields[0]), fields[1], std::stod(fields[2]),
                   std::stod(fields[3]), std::stoi(fields[4])});
  }
  return out;
}

void write_metrics_json(const std::string& path, const MetricsReport& report) {
  json j = {{"precision", report.precision},
            {"recall", report.recall},
            {"f1", report.f1},
            {"roc_auc", report.roc_auc},
            {"avg_precision", report.avg_precision},
            {"tp", report.tp},
            {"fp", report.fp},
            {"tn", report.tn},
            {"fn", report.fn}};
  open_out(path) << j.dump(2) << "\n";
}

MetricsReport read_metrics_json(const std::string& path) {
  json j = parse_json_file(path);
  MetricsReport r;
  r.precision = j.at("precision").get<double>();
  r.recall = j.at("recall").get<double>();
  r.f1 = j.at("f1").get<double>();
  r.roc_auc = j.at("roc_auc").get<double>();
  r.avg_precision = j.at("avg_precision").get<double>();
  r.tp = j.at("tp").get<std::size_t>();
  r.fp = j.at("fp").get<std::size_t>();
  r.tn = j.at("tn").get<std::size_t>();
  r.fn = j.at("fn").get<std::size_t>();
  return r;
}

void write_history_csv(const std::string& path, const std::vector<HistoryRow>& history) {
  auto out = open_out(path);
  out << "epoch,train_loss,val_loss,lr\n";
  for (const auto& row : history) {
    out << row.epoch << ",";
    write_double(out, row.train_loss);
    out << ",";
    write_double(out, row.val_loss);
    out << ",";
    write_double(out, row.lr);
    out << "\n";
  }
}

void save_dataset(const std::string& prefix, const Dataset& dataset) {
  const TelemetrySeries& s = dataset.series;
  json j;
  j["timestamps"] = s.timestamps;
  j["interval"] = s.interval;
  j["instances"] = s.instances;
  j["request_types"] = s.request_types;
  j["f_m"] = s.f_m;
  j["f_l"] = s.f_l;
  j["adjacency"] = dataset.adjacency;
  j["labels"] = dataset.labels;
  j["stats"] = {{"metric_min", dataset.stats.metric_min},
                {"metric_max", dataset.stats.metric_max},
                {"log_min", dataset.stats.log_min},
                {"log_max", dataset.stats.log_max},
                {"trace_mean", dataset.stats.trace_mean},
                {"epsilon", dataset.stats.epsilon},
                {"kept_metric_columns", dataset.stats.kept_metric_columns}};
  j["blob_sizes"] = {s.metrics.size(), s.logs.size(), s.spans.size()};
  open_out(prefix + ".json") << j.dump(2) << "\n";

  auto bin = open_out(prefix + ".bin");
  write_doubles(bin, s.metrics);
  write_doubles(bin, s.logs);
  write_doubles(bin, s.spans);
}

Dataset load_dataset(const std::string& prefix) {
  json j = parse_json_file(prefix + ".json");
  Dataset d;
  TelemetrySeries& s = d.series;
  s.timestamps = j.at("timestamps").get<std::vector<std::int64_t>>();
  s.interval = j.at("interval").get<std::int64_t>();
  s.instances = j.at("instances").get<std::vector<std::string>>();
  s.request_types = j.at("request_types").get<std::vector<std::string>>();
  s.f_m = j.at("f_m").get<std::size_t>();
  s.f_l = j.at("f_l").get<std::size_t>();
  d.adjacency = j.at("adjacency").get<std::vector<std::uint8_t>>();
  d.labels = j.at("labels").get<std::vector<std::vector<int>>>();
  const auto& st = j.at("stats");
  d.stats.metric_min = st.at("metric_min").get<std::vector<double>>();
  d.stats.metric_max = st.at("metric_max").get<std::vector<double>>();
  d.stats.log_min = st.at("log_min").get<std::vector<double>>();
  d.stats.log_max = st.at("log_max").get<std::vector<double>>();
  d.stats.trace_mean = st.at("trace_mean").get<std::vector<double>>();
  d.stats.epsilon = st.at("epsilon").get<double>();
  d.stats.kept_metric_columns = st.at("kept_metric_columns").get<std::vector<std::size_t>>();
  auto sizes = j.at("blob_sizes").get<std::vector<std::size_t>>();
  if (sizes.size() != 3) throw std::runtime_error("bad dataset manifest: " + prefix + ".json");
  s.metrics.resize(sizes[0]);
  s.logs.resize(sizes[1]);
  s.spans.resize(sizes[2]);
  auto bin = open_in(prefix + ".bin");
  read_doubles(bin, s.metrics, prefix + ".bin");
  read_doubles(bin, s.logs, prefix + ".bin");
  read_doubles(bin, s.spans, prefix + ".bin");
  return d;
}

namespace {

json config_to_json(const ModelConfig& c) {
  return {{"d_model", c.d_model},       {"heads", c.heads},
          {"encoder_layers", c.encoder_layers}, {"decoder_layers", c.decoder_layers},
          {"window", c.window},         {"dropout", c.dropout},
          {"n", c.n},                   {"f_m", c.f_m},
          {"f_l", c.f_l},               {"f_s", c.f_s},
          {"ffn_hidden", c.ffn_hidden}, {"seed", c.seed},
          {"use_sam", c.use_sam},       {"use_tam", c.use_tam}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.d_model = j.at("d_model").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.encoder_layers = j.at("encoder_layers").get<std::size_t>();
  c.decoder_layers = j.at("decoder_layers").get<std::size_t>();
  c.window = j.at("window").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.n = j.at("n").get<std::size_t>();
  c.f_m = j.at("f_m").get<std::size_t>();
  c.f_l = j.at("f_l").get<std::size_t>();
  c.f_s = j.at("f_s").get<std::size_t>();
  c.ffn_hidden = j.at("ffn_hidden").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.use_sam = j.at("use_sam").get<bool>();
  c.use_tam = j.at("use_tam").get<bool>();
  return c;
}

}  // namespace

void save_checkpoint(const std::string& prefix, const Model& model) {
  json j;
  j["config"] = config_to_json(model.config());
  json edges = json::array();
  for (const auto& [src, dst] : model.topology().edges) edges.push_back({src, dst});
  j["topology"] = {{"n", model.topology().n}, {"edges", edges}};
  json params = json::array();
  for (const auto& [name, t] : model.parameters())
    params.push_back({{"name", name}, {"shape", t.shape()}});
  j["parameters"] = params;
  open_out(prefix + ".json") << j.dump(2) << "\n";

  auto bin = open_out(prefix + ".bin");
  for (const auto& [name, t] : model.parameters()) {
    std::vector<double> v(t.data().begin(), t.data().end());
    write_doubles(bin, v);
  }
}

Model load_checkpoint(const std::string& prefix) {
  json j = parse_json_file(prefix + ".json");
  ModelConfig cfg = config_from_json(j.at("config"));
  std::size_t n = j.at("topology").at("n").get<std::size_t>();
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (const auto& e : j.at("topology").at("edges"))
    edges.push_back({e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>()});
  Model model(cfg, GraphTopology::from_edges(n, std::move(edges)));

  const auto& manifest = j.at("parameters");
  if (manifest.size() != model.parameters().size())
    throw std::runtime_error("checkpoint manifest size mismatch: " + prefix + ".json");
  auto bin = open_in(prefix + ".bin");
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    auto& [name, t] = model.parameters()[i];
    const auto& entry = manifest[i];
    if (entry.at("name").get<std::string>() != name ||
        entry.at("shape").get<std::vector<std::size_t>>() != t.shape())
      throw std::runtime_error("checkpoint shape mismatch for parameter " + name + " in " +
                               prefix + ".json");
    std::vector<double> v(t.size());
    read_doubles(bin, v, prefix + ".bin");
    std::copy(v.begin(), v.end(), t.mutable_data().begin());
  }
  return model;
}

}  // namespace mstgad
