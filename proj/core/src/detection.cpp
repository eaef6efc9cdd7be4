#include "mstgad/detection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mstgad {

std::vector<Score> score_stream(const Model& model, const GraphSeries& series,
                                const std::vector<WindowSample>& windows) {
  std::vector<Score> out;
  out.reserve(windows.size() * model.config().n);
  NoGradGuard no_grad;
  for (const auto& sample : windows) {
    WindowTensors w = model.window_tensors(series, sample);
    Reconstruction r = model.forward(w, false, 0);
    Tensor sq = model.squared_residual(w, r);
    Tensor re = model.reconstruction_error(sq);
    Tensor p = model.class_probabilities(sq);
    std::int64_t ts = series.graphs[sample.last].timestamp;
    for (std::size_t i = 0; i < model.config().n; ++i) {
      int label = i < sample.labels.size() ? sample.labels[i] : -1;
      out.push_back({ts, i, re.at(i, 0), p.at(i, 1), label});
    }
  }
  return out;
}

namespace {

struct Counts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double precision() const { return tp + fp ? double(tp) / double(tp + fp) : 0.0; }
  double recall() const { return tp + fn ? double(tp) / double(tp + fn) : 0.0; }
  double f1() const {
    double p = precision(), r = recall();
    return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
};

Counts count(const std::vector<double>& scores, const std::vector<int>& labels,
             double threshold) {
  Counts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] < 0) continue;
    bool pred = scores[i] > threshold;
    if (labels[i] == 1)
      pred ? ++c.tp : ++c.fn;
    else
      pred ? ++c.fp : ++c.tn;
  }
  return c;
}

}  // namespace

double select_threshold(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("select_threshold: scores/labels size mismatch");
  bool has_pos = false, has_neg = false;
  std::vector<double> uniq;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) has_pos = true;
    if (labels[i] == 0) has_neg = true;
    if (labels[i] >= 0) uniq.push_back(scores[i]);
  }
  if (!has_pos || !has_neg)
    throw std::invalid_argument("select_threshold: validation labels are single-class");
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  if (uniq.size() == 1) return uniq[0];

  // Candidates: one below the minimum (predict-all-positive) plus the
  // midpoints, ascending, first maximum kept so ties pick the lower
  // threshold (higher recall).
  std::vector<double> candidates;
  candidates.push_back(uniq.front() - 1.0);
  for (std::size_t i = 0; i + 1 < uniq.size(); ++i)
    candidates.push_back(0.5 * (uniq[i] + uniq[i + 1]));
  double best_threshold = candidates.front(), best_f1 = -1.0;
  for (double th : candidates) {
    double f1 = count(scores, labels, th).f1();
    if (f1 > best_f1) {
      best_f1 = f1;
      best_threshold = th;
    }
  }
  return best_threshold;
}

std::vector<Decision> decide(const std::vector<Score>& scores, DecisionMode mode,
                             double threshold) {
  std::vector<Decision> out;
  out.reserve(scores.size());
  for (const auto& s : scores) {
    int d = mode == DecisionMode::classifier ? (s.p_abnormal > threshold ? 1 : 0)
                                             : (s.re > threshold ? 1 : 0);
    out.push_back({s.timestamp, s.instance, s.re, s.p_abnormal, d});
  }
  return out;
}

MetricsReport evaluate(const std::vector<double>& scores, const std::vector<int>& decided,
                       const std::vector<int>& labels) {
  if (scores.size() != labels.size() || decided.size() != labels.size())
    throw std::invalid_argument("evaluate: input size mismatch");

  std::vector<std::pair<double, int>> ranked;  // (score, label), labeled rows only
  Counts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) continue;
    ranked.push_back({scores[i], labels[i]});
    if (labels[i] == 1)
      decided[i] ? ++c.tp : ++c.fn;
    else
      decided[i] ? ++c.fp : ++c.tn;
  }
  std::size_t pos = c.tp + c.fn, neg = c.fp + c.tn;
  if (pos == 0) throw std::invalid_argument("evaluate: no positive labels");
  if (neg == 0) throw std::invalid_argument("evaluate: no negative labels");

  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  MetricsReport rep;
  rep.tp = c.tp;
  rep.fp = c.fp;
  rep.tn = c.tn;
  rep.fn = c.fn;
  rep.precision = c.precision();
  rep.recall = c.recall();
  rep.f1 = c.f1();

  // ROC by trapezoid and AP by the step rule, grouping tied scores.
  double auc = 0.0, ap = 0.0;
  double prev_tpr = 0.0, prev_fpr = 0.0, prev_rc = 0.0;
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < ranked.size()) {
    std::size_t j = i;
    while (j < ranked.size() && ranked[j].first == ranked[i].first) {
      if (ranked[j].second == 1)
        ++tp;
      else
        ++fp;
      ++j;
    }
    double tpr = double(tp) / double(pos);
    double fpr = double(fp) / double(neg);
    auc += 0.5 * (tpr + prev_tpr) * (fpr - prev_fpr);
    double pr = double(tp) / double(tp + fp);
    ap += (tpr - prev_rc) * pr;
    prev_tpr = tpr;
    prev_fpr = fpr;
    prev_rc = tpr;
    i = j;
  }
  rep.roc_auc = auc;
  rep.avg_precision = ap;
  return rep;
}

MetricsReport evaluate(const std::vector<Score>& scores, const std::vector<Decision>& decisions,
                       DecisionMode mode) {
  if (scores.size() != decisions.size())
    throw std::invalid_argument("evaluate: scores/decisions size mismatch");
  std::vector<double> s(scores.size());
  std::vector<int> d(scores.size()), y(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    s[i] = mode == DecisionMode::classifier ? scores[i].p_abnormal : scores[i].re;
    d[i] = decisions[i].decided;
    y[i] = scores[i].label;
  }
  return evaluate(s, d, y);
}

}  // namespace mstgad
