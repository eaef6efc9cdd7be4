#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "mstgad/detection.hpp"
#include "mstgad/graph.hpp"
#include "mstgad/io.hpp"
#include "mstgad/synth.hpp"
#include "mstgad/telemetry.hpp"
#include "mstgad/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mstgad;

namespace {

bool verbose() {
  const char* v = std::getenv("TWIN_GRAPH_AD_LOG");
  return v && std::string(v) != "" && std::string(v) != "0" && std::string(v) != "off";
}

void log_info(const std::string& msg) {
  if (verbose()) std::cerr << "[mstgad] " << msg << "\n";
}

struct RunConfig {
  json raw;
  std::string out = "run";
  std::uint64_t seed = 0;
  bool seed_overridden = false;

  std::string path(const std::string& key, const std::string& fallback) const {
    if (raw.contains("paths") && raw["paths"].contains(key))
      return raw["paths"][key].get<std::string>();
    return (fs::path(out) / fallback).string();
  }

  template <typename T>
  T get(const std::string& section, const std::string& key, T fallback) const {
    if (raw.contains(section) && raw[section].contains(key))
      return raw[section][key].get<T>();
    return fallback;
  }
  template <typename T>
  T top(const std::string& key, T fallback) const {
    if (raw.contains(key)) return raw[key].get<T>();
    return fallback;
  }
};

RunConfig load_run_config(const std::string& config_path, const std::string& out,
                          std::uint64_t seed, bool seed_set) {
  RunConfig cfg;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("missing config file: " + config_path);
    in >> cfg.raw;
  } else {
    cfg.raw = json::object();
  }
  cfg.out = out;
  cfg.seed = seed_set ? seed : cfg.top<std::uint64_t>("seed", 0);
  cfg.seed_overridden = seed_set;
  fs::create_directories(cfg.out);
  return cfg;
}

void require_file(const std::string& path, const std::string& producer) {
  if (!fs::exists(path))
    throw std::runtime_error("missing artifact: " + path + "; run `mstgad " + producer +
                             "` first");
}

SynthConfig synth_config(const RunConfig& cfg) {
  SynthConfig s;
  s.seed = cfg.get<std::uint64_t>("synth", "seed", cfg.seed);
  if (cfg.seed_overridden) s.seed = cfg.seed;
  s.n = cfg.get<std::size_t>("synth", "n", s.n);
  s.edge_probability = cfg.get<double>("synth", "edge_probability", s.edge_probability);
  s.t = cfg.get<std::size_t>("synth", "t", s.t);
  s.interval = cfg.get<std::int64_t>("synth", "interval", s.interval);
  s.f_m = cfg.get<std::size_t>("synth", "f_m", s.f_m);
  s.template_vocab = cfg.get<std::size_t>("synth", "template_vocab", s.template_vocab);
  s.request_types = cfg.get<std::size_t>("synth", "request_types", s.request_types);
  s.anomaly_rate = cfg.get<double>("synth", "anomaly_rate", s.anomaly_rate);
  s.label_known_fraction =
      cfg.get<double>("synth", "label_known_fraction", s.label_known_fraction);
  s.anomaly_magnitude = cfg.get<double>("synth", "anomaly_magnitude", s.anomaly_magnitude);
  if (cfg.raw.contains("synth") && cfg.raw["synth"].contains("anomaly_kinds")) {
    s.anomaly_kinds.clear();
    for (const auto& k : cfg.raw["synth"]["anomaly_kinds"])
      s.anomaly_kinds.push_back(anomaly_kind_from_string(k.get<std::string>()));
  }
  return s;
}

ModelConfig model_config(const RunConfig& cfg) {
  ModelConfig m;
  m.d_model = cfg.get<std::size_t>("model", "d_model", m.d_model);
  m.heads = cfg.get<std::size_t>("model", "heads", m.heads);
  m.encoder_layers = cfg.get<std::size_t>("model", "encoder_layers", m.encoder_layers);
  m.decoder_layers = cfg.get<std::size_t>("model", "decoder_layers", m.decoder_layers);
  m.window = cfg.get<std::size_t>("model", "window", m.window);
  m.dropout = cfg.get<double>("model", "dropout", m.dropout);
  m.ffn_hidden = cfg.get<std::size_t>("model", "ffn_hidden", m.ffn_hidden);
  m.use_sam = cfg.get<bool>("model", "use_sam", m.use_sam);
  m.use_tam = cfg.get<bool>("model", "use_tam", m.use_tam);
  m.seed = cfg.seed;
  return m;
}

LossConfig loss_config(const RunConfig& cfg) {
  LossConfig l;
  l.eta = cfg.get<double>("loss", "eta", l.eta);
  l.guard_eps = cfg.get<double>("loss", "guard_eps", l.guard_eps);
  l.max_epochs = cfg.get<std::size_t>("loss", "max_epochs", l.max_epochs);
  l.patience = cfg.get<std::size_t>("loss", "patience", l.patience);
  l.lr = cfg.get<double>("loss", "lr", l.lr);
  l.lr_decay = cfg.get<double>("loss", "lr_decay", l.lr_decay);
  l.batch_size = cfg.get<std::size_t>("loss", "batch_size", l.batch_size);
  return l;
}

struct SplitFractions {
  double train = 0.6, val = 0.1, test = 0.3;
};

SplitFractions split_fractions(const RunConfig& cfg) {
  SplitFractions s;
  s.train = cfg.get<double>("split", "train", s.train);
  s.val = cfg.get<double>("split", "val", s.val);
  s.test = cfg.get<double>("split", "test", s.test);
  if (std::abs(s.train + s.val + s.test - 1.0) > 1e-9)
    throw std::runtime_error("split fractions must sum to 1");
  return s;
}

TelemetrySeries slice_series(const TelemetrySeries& s, std::size_t t0, std::size_t t1) {
  TelemetrySeries out = s;
  std::size_t n = s.n(), fs_ = s.f_s();
  out.timestamps.assign(s.timestamps.begin() + t0, s.timestamps.begin() + t1);
  out.metrics.assign(s.metrics.begin() + t0 * n * s.f_m, s.metrics.begin() + t1 * n * s.f_m);
  out.logs.assign(s.logs.begin() + t0 * n * s.f_l, s.logs.begin() + t1 * n * s.f_l);
  out.spans.assign(s.spans.begin() + t0 * n * n * fs_, s.spans.begin() + t1 * n * n * fs_);
  return out;
}

std::vector<std::vector<int>> labels_per_timestamp(const TelemetrySeries& series,
                                                   const std::vector<LabelRecord>& records) {
  std::map<std::int64_t, std::size_t> t_index;
  for (std::size_t t = 0; t < series.t_count(); ++t) t_index[series.timestamps[t]] = t;
  std::map<std::string, std::size_t> i_index;
  for (std::size_t i = 0; i < series.instances.size(); ++i) i_index[series.instances[i]] = i;
  std::vector<std::vector<int>> labels(series.t_count(),
                                       std::vector<int>(series.n(), -1));
  for (const auto& rec : records) {
    auto t = t_index.find(rec.timestamp);
    auto i = i_index.find(rec.instance_id);
    if (t != t_index.end() && i != i_index.end()) labels[t->second][i->second] = rec.label;
  }
  return labels;
}

int cmd_synth(const RunConfig& cfg) {
  SynthConfig sc = synth_config(cfg);
  log_info("generating synthetic dataset (n=" + std::to_string(sc.n) +
           ", t=" + std::to_string(sc.t) + ")");
  SynthDataset d = generate(sc);
  MetricsFile mf;
  for (std::size_t f = 0; f < sc.f_m; ++f) mf.columns.push_back("m" + std::to_string(f));
  mf.records = d.metrics;
  write_metrics_csv(cfg.path("metrics", "metrics.csv"), mf);
  write_logs_jsonl(cfg.path("logs", "logs.jsonl"), d.logs);
  write_spans_jsonl(cfg.path("spans", "spans.jsonl"), d.spans);
  write_labels_csv(cfg.path("labels", "labels.csv"), d.labels);
  write_truth_json(cfg.path("truth", "truth.json"), d.events);
  log_info("wrote " + std::to_string(d.metrics.size()) + " metric rows, " +
           std::to_string(d.logs.size()) + " logs, " + std::to_string(d.spans.size()) +
           " spans");
  return 0;
}

int cmd_templates(const RunConfig& cfg) {
  std::string logs_path = cfg.path("logs", "logs.jsonl");
  require_file(logs_path, "synth");
  auto logs = read_logs_jsonl(logs_path);
  auto templates = mine_log_templates(logs);
  write_templates_json(cfg.path("templates", "templates.json"), templates);
  log_info("mined " + std::to_string(templates.size()) + " templates from " +
           std::to_string(logs.size()) + " logs");
  return 0;
}

int cmd_preprocess(const RunConfig& cfg) {
  std::string metrics_path = cfg.path("metrics", "metrics.csv");
  std::string logs_path = cfg.path("logs", "logs.jsonl");
  std::string spans_path = cfg.path("spans", "spans.jsonl");
  std::string labels_path = cfg.path("labels", "labels.csv");
  std::string templates_path = cfg.path("templates", "templates.json");
  require_file(metrics_path, "synth");
  require_file(logs_path, "synth");
  require_file(spans_path, "synth");
  require_file(labels_path, "synth");
  require_file(templates_path, "templates");

  MetricsFile metrics = read_metrics_csv(metrics_path);
  auto logs = read_logs_jsonl(logs_path);
  auto spans = read_spans_jsonl(spans_path);
  auto label_records = read_labels_csv(labels_path);
  auto templates = read_templates_json(templates_path);

  std::set<std::string> instance_set;
  for (const auto& r : metrics.records) instance_set.insert(r.instance_id);
  for (const auto& r : label_records) instance_set.insert(r.instance_id);
  std::set<std::string> request_set;
  for (const auto& s : spans) request_set.insert(s.request_type);

  std::int64_t interval = cfg.top<std::int64_t>("interval", 60);
  TelemetrySeries series =
      bucket(metrics.records, logs, spans, interval,
             {instance_set.begin(), instance_set.end()},
             {request_set.begin(), request_set.end()}, templates);

  SplitFractions split = split_fractions(cfg);
  std::size_t t_train = std::size_t(split.train * double(series.t_count()));
  TelemetrySeries train = slice_series(series, 0, t_train);
  double var_threshold = cfg.top<double>("variance_threshold", 1e-12);
  auto kept = filter_low_variance_metrics(train, var_threshold);
  apply_metric_filter(series, kept);

  Dataset dataset;
  dataset.adjacency = build_adjacency(train);
  dataset.stats = fit_normalization(train);
  dataset.stats.kept_metric_columns = kept;
  normalize(series, dataset.stats);
  dataset.labels = labels_per_timestamp(series, label_records);
  dataset.series = std::move(series);
  save_dataset((fs::path(cfg.out) / "dataset").string(), dataset);
  log_info("dataset: t=" + std::to_string(dataset.series.t_count()) +
           " n=" + std::to_string(dataset.series.n()) +
           " f_m=" + std::to_string(dataset.series.f_m) +
           " f_l=" + std::to_string(dataset.series.f_l) +
           " f_s=" + std::to_string(dataset.series.f_s()));
  return 0;
}

struct WindowSplits {
  std::vector<WindowSample> train, val, test;
};

WindowSplits split_windows(const std::vector<WindowSample>& windows, std::size_t t_count,
                           const SplitFractions& split) {
  std::size_t t_train = std::size_t(split.train * double(t_count));
  std::size_t t_val = std::size_t((split.train + split.val) * double(t_count));
  WindowSplits out;
  for (const auto& w : windows) {
    if (w.last < t_train)
      out.train.push_back(w);
    else if (w.last < t_val)
      out.val.push_back(w);
    else
      out.test.push_back(w);
  }
  return out;
}

int cmd_train(const RunConfig& cfg) {
  std::string prefix = (fs::path(cfg.out) / "dataset").string();
  require_file(prefix + ".json", "preprocess");
  Dataset dataset = load_dataset(prefix);
  GraphSeries graphs = build_graphs(dataset.series, dataset.adjacency);

  ModelConfig mc = model_config(cfg);
  mc.n = dataset.series.n();
  mc.f_m = dataset.series.f_m;
  mc.f_l = dataset.series.f_l;
  mc.f_s = dataset.series.f_s();

  SplitFractions split = split_fractions(cfg);
  std::size_t t_train = std::size_t(split.train * double(dataset.series.t_count()));

  // Extra unlabeled masking applies to the training range only.
  double unlabeled = cfg.top<double>("unlabeled_fraction", 0.5);
  auto labels = dataset.labels;
  std::mt19937_64 mask_rng(mc.seed * 7349ULL + 11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t t = 0; t < t_train && t < labels.size(); ++t)
    for (auto& l : labels[t])
      if (l >= 0 && unit(mask_rng) < unlabeled) l = -1;

  auto splits = split_windows(make_windows(graphs, labels, mc.window),
                              dataset.series.t_count(), split);
  if (splits.train.empty() || splits.val.empty())
    throw std::runtime_error("train/validation split is empty; need more timestamps");

  LossConfig lc = loss_config(cfg);
  lc.n_a = 0;
  lc.n_n = 0;
  for (const auto& w : splits.train)
    for (int l : w.labels) {
      if (l == 1) ++lc.n_a;
      if (l == 0) ++lc.n_n;
    }

  std::vector<std::pair<std::size_t, std::size_t>> edge_list;
  std::size_t n = dataset.series.n();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (dataset.adjacency[i * n + j]) edge_list.push_back({i, j});
  Model model(mc, GraphTopology::from_edges(n, edge_list));

  log_info("training on " + std::to_string(splits.train.size()) + " windows (n_a=" +
           std::to_string(lc.n_a) + ", n_n=" + std::to_string(lc.n_n) + ")");
  TrainResult result = train_model(model, graphs, splits.train, splits.val, lc);
  save_checkpoint((fs::path(cfg.out) / "checkpoint").string(), model);
  write_history_csv((fs::path(cfg.out) / "history.csv").string(), result.history);
  log_info("best epoch " + std::to_string(result.best_epoch) + ", val loss " +
           std::to_string(result.best_val_loss));
  return 0;
}

DecisionMode decision_mode(const RunConfig& cfg) {
  std::string mode = cfg.top<std::string>("decision_mode", "classifier");
  if (mode == "classifier") return DecisionMode::classifier;
  if (mode == "threshold") return DecisionMode::threshold;
  throw std::runtime_error("unknown decision_mode: " + mode);
}

int cmd_detect(const RunConfig& cfg) {
  std::string dataset_prefix = (fs::path(cfg.out) / "dataset").string();
  std::string ckpt_prefix = (fs::path(cfg.out) / "checkpoint").string();
  require_file(dataset_prefix + ".json", "preprocess");
  require_file(ckpt_prefix + ".json", "train");
  Dataset dataset = load_dataset(dataset_prefix);
  Model model = load_checkpoint(ckpt_prefix);
  GraphSeries graphs = build_graphs(dataset.series, dataset.adjacency);
  auto splits = split_windows(make_windows(graphs, dataset.labels, model.config().window),
                              dataset.series.t_count(), split_fractions(cfg));
  if (splits.test.empty()) throw std::runtime_error("test split is empty");

  DecisionMode mode = decision_mode(cfg);
  double threshold = 0.5;
  if (mode == DecisionMode::threshold) {
    auto val_scores = score_stream(model, graphs, splits.val);
    std::vector<double> s;
    std::vector<int> y;
    for (const auto& v : val_scores) {
      s.push_back(v.re);
      y.push_back(v.label);
    }
    threshold = select_threshold(s, y);
    log_info("selected RE threshold " + std::to_string(threshold));
  }
  auto scores = score_stream(model, graphs, splits.test);
  auto decisions = decide(scores, mode, threshold);
  write_decisions_csv((fs::path(cfg.out) / "decisions.csv").string(), decisions,
                      dataset.series.instances);
  log_info("wrote " + std::to_string(decisions.size()) + " decisions");
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  std::string decisions_path = (fs::path(cfg.out) / "decisions.csv").string();
  require_file(decisions_path, "detect");
  auto rows = read_decisions_csv(decisions_path);

  // Ground truth from truth.json when available, labels.csv otherwise.
  std::string truth_path = cfg.path("truth", "truth.json");
  std::string labels_path = cfg.path("labels", "labels.csv");
  std::vector<double> scores;
  std::vector<int> decided, labels;
  DecisionMode mode = decision_mode(cfg);
  if (fs::exists(truth_path)) {
    auto events = read_truth_json(truth_path);
    for (const auto& r : rows) {
      int y = 0;
      for (const auto& ev : events)
        if (r.timestamp >= ev.start_ts && r.timestamp <= ev.end_ts &&
            std::find(ev.instances.begin(), ev.instances.end(), r.instance) !=
                ev.instances.end())
          y = 1;
      labels.push_back(y);
      scores.push_back(mode == DecisionMode::classifier ? r.p_abnormal : r.re);
      decided.push_back(r.decided);
    }
  } else {
    require_file(labels_path, "synth");
    std::map<std::pair<std::int64_t, std::string>, int> by_key;
    for (const auto& l : read_labels_csv(labels_path))
      by_key[{l.timestamp, l.instance_id}] = l.label;
    for (const auto& r : rows) {
      auto it = by_key.find({r.timestamp, r.instance});
      labels.push_back(it == by_key.end() ? -1 : it->second);
      scores.push_back(mode == DecisionMode::classifier ? r.p_abnormal : r.re);
      decided.push_back(r.decided);
    }
  }
  MetricsReport report = evaluate(scores, decided, labels);
  write_metrics_json((fs::path(cfg.out) / "metrics.json").string(), report);
  log_info("f1=" + std::to_string(report.f1) + " auc=" + std::to_string(report.roc_auc));
  return 0;
}

int cmd_report(const RunConfig& cfg) {
  std::string metrics_path = (fs::path(cfg.out) / "metrics.json").string();
  require_file(metrics_path, "eval");
  MetricsReport r = read_metrics_json(metrics_path);
  std::printf("%-10s %-10s %-10s %-10s %-10s\n", "PR", "RC", "F1", "AUC", "AP");
  std::printf("%-10.4f %-10.4f %-10.4f %-10.4f %-10.4f\n", r.precision, r.recall, r.f1,
              r.roc_auc, r.avg_precision);
  std::printf("tp=%zu fp=%zu tn=%zu fn=%zu\n", r.tp, r.fp, r.tn, r.fn);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mstgad: multi-source telemetry anomaly detection pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out = "run";
  std::uint64_t seed = 0;
  bool seed_set = false;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--out", out, "run directory for artifacts");
  app.add_option("--seed", seed, "override the configured seed")
      ->each([&](const std::string&) { seed_set = true; });

  auto* c_synth = app.add_subcommand("synth", "generate synthetic telemetry");
  auto* c_templates = app.add_subcommand("templates", "mine log templates");
  auto* c_preprocess = app.add_subcommand("preprocess", "bucket, filter, normalize");
  auto* c_train = app.add_subcommand("train", "train the model");
  auto* c_detect = app.add_subcommand("detect", "score the test split");
  auto* c_eval = app.add_subcommand("eval", "compute metrics from decisions");
  auto* c_report = app.add_subcommand("report", "print the metrics table");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = load_run_config(config_path, out, seed, seed_set);
    if (c_synth->parsed()) return cmd_synth(cfg);
    if (c_templates->parsed()) return cmd_templates(cfg);
    if (c_preprocess->parsed()) return cmd_preprocess(cfg);
    if (c_train->parsed()) return cmd_train(cfg);
    if (c_detect->parsed()) return cmd_detect(cfg);
    if (c_eval->parsed()) return cmd_eval(cfg);
    if (c_report->parsed()) return cmd_report(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
