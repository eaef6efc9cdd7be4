#pragma once

#include <cstdint>
#include <vector>

#include "mstgad/graph.hpp"
#include "mstgad/network.hpp"

namespace mstgad {

enum class DecisionMode { classifier, threshold };

struct Score {
  std::int64_t timestamp = 0;
  std::size_t instance = 0;
  double re = 0.0;
  double p_abnormal = 0.0;
  int label = -1;  // -1 unknown, 0 normal, 1 abnormal
};

struct Decision {
  std::int64_t timestamp = 0;
  std::size_t instance = 0;
  double re = 0.0;
  double p_abnormal = 0.0;
  int decided = 0;
};

struct MetricsReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double roc_auc = 0.0;
  double avg_precision = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

// One (RE, p_abnormal) pair per instance per window's last timestamp;
// inference only (dropout off), deterministic.
std::vector<Score> score_stream(const Model& model, const GraphSeries& series,
                                const std::vector<WindowSample>& windows);

// RE threshold maximizing F1 over midpoints of sorted unique scores; ties
// broken toward the lower threshold. Throws if labels are single-class.
double select_threshold(const std::vector<double>& scores, const std::vector<int>& labels);

std::vector<Decision> decide(const std::vector<Score>& scores, DecisionMode mode,
                             double threshold = 0.5);

// Rows with label -1 are excluded. decided drives PR/RC/F1; the continuous
// score drives ROC-AUC (trapezoid) and AP. Throws when no positive labels
// remain.
MetricsReport evaluate(const std::vector<double>& scores, const std::vector<int>& decided,
                       const std::vector<int>& labels);

MetricsReport evaluate(const std::vector<Score>& scores, const std::vector<Decision>& decisions,
                       DecisionMode mode);

}  // namespace mstgad
