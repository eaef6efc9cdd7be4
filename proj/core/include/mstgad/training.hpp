#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mstgad/graph.hpp"
#include "mstgad/network.hpp"
#include "mstgad/tensor.hpp"

namespace mstgad {

struct LossConfig {
  double eta = 0.01;        // unlabeled reconstruction weight
  double guard_eps = 1e-6;  // guards 1/RE and the BCE logs
  std::size_t n_a = 0;      // global abnormal count over the training set
  std::size_t n_n = 0;      // global normal count
  std::size_t max_epochs = 300;
  std::size_t patience = 15;
  double lr = 0.001;
  double lr_decay = 0.9;  // multiplicative, once per epoch
  std::size_t batch_size = 50;
};

// Labels: -1 unknown, 0 normal, 1 abnormal.
// L1 = (1/(m+n)) (eta * sum_unlabeled RE + sum_abnormal 1/(RE+eps) + sum_normal RE)
Tensor loss_l1(const Tensor& re, const std::vector<int>& labels, double eta,
               double guard_eps);

// Weighted BCE over labeled rows only; p is N x 2 (normal, abnormal).
// Returns scalar 0 when the batch holds no labels; has_labeled reports that.
Tensor loss_l2(const Tensor& p, const std::vector<int>& labels, std::size_t n_a,
               std::size_t n_n, double guard_eps, bool* has_labeled = nullptr);

// (1/epoch) L1 + (1 - 1/epoch) L2, epoch >= 1.
Tensor combined_loss(const Tensor& l1, const Tensor& l2, std::size_t epoch);

// AdaBelief: Adam-style moments with the second moment taken over the
// deviation of the gradient from its EMA.
class AdaBelief {
 public:
  explicit AdaBelief(std::vector<std::pair<std::string, Tensor>>& params, double lr = 0.001,
                     double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-12);

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  void zero_grad();
  void step();

 private:
  std::vector<std::pair<std::string, Tensor>>* params_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, s_;
};

struct HistoryRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<HistoryRow> history;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool early_stopped = false;
};

// Algorithm: per epoch, shuffle train windows (seeded), mini-batch the
// combined loss, AdaBelief step per batch, decay lr, early-stop on a fixed
// 0.5/0.5 blend of the validation losses. Restores the best-validation
// parameters before returning. Throws std::runtime_error on non-finite loss.
TrainResult train_model(Model& model, const GraphSeries& series,
                        const std::vector<WindowSample>& train_windows,
                        const std::vector<WindowSample>& val_windows, const LossConfig& cfg);

}  // namespace mstgad
