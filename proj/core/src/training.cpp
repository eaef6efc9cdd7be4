#include "mstgad/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace mstgad {

Tensor loss_l1(const Tensor& re, const std::vector<int>& labels, double eta,
               double guard_eps) {
  if (labels.empty() || re.rows() != labels.size())
    throw std::invalid_argument("loss_l1: need one label per RE row");
  std::vector<std::size_t> unl, abn, nrm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0)
      unl.push_back(i);
    else if (labels[i] == 1)
      abn.push_back(i);
    else
      nrm.push_back(i);
  }
  Tensor total = Tensor::scalar(0.0);
  if (!unl.empty()) total = add(total, scale(sum_all(select_rows(re, unl)), eta));
  if (!abn.empty())
    total = add(total, sum_all(reciprocal(add_scalar(select_rows(re, abn), guard_eps))));
  if (!nrm.empty()) total = add(total, sum_all(select_rows(re, nrm)));
  return scale(total, 1.0 / double(labels.size()));
}

Tensor loss_l2(const Tensor& p, const std::vector<int>& labels, std::size_t n_a,
               std::size_t n_n, double guard_eps, bool* has_labeled) {
  if (labels.empty() || p.rows() != labels.size() || p.cols() != 2)
    throw std::invalid_argument("loss_l2: need N x 2 probabilities and one label per row");
  std::vector<std::size_t> abn, nrm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1)
      abn.push_back(i);
    else if (labels[i] == 0)
      nrm.push_back(i);
  }
  std::size_t n = abn.size() + nrm.size();
  if (has_labeled) *has_labeled = n > 0;
  if (n == 0) return Tensor::scalar(0.0);

  // y_hat = P(abnormal), picked out with a constant column selector.
  Tensor pick_abn = Tensor::from_data({2, 1}, {0.0, 1.0});
  Tensor pick_nrm = Tensor::from_data({2, 1}, {1.0, 0.0});
  double weight = n_a > 0 ? double(n_n) / double(n_a) : 1.0;
  Tensor total = Tensor::scalar(0.0);
  if (!abn.empty()) {
    Tensor y_hat = matmul(select_rows(p, abn), pick_abn);
    total = add(total, scale(sum_all(log_elem(add_scalar(y_hat, guard_eps))), weight));
  }
  if (!nrm.empty()) {
    Tensor one_minus = matmul(select_rows(p, nrm), pick_nrm);  // rows sum to 1
    total = add(total, sum_all(log_elem(add_scalar(one_minus, guard_eps))));
  }
  return scale(total, -1.0 / double(n));
}

Tensor combined_loss(const Tensor& l1, const Tensor& l2, std::size_t epoch) {
  if (epoch < 1) throw std::invalid_argument("combined_loss: epoch must be >= 1");
  double w1 = 1.0 / double(epoch);
  return add(scale(l1, w1), scale(l2, 1.0 - w1));
}

AdaBelief::AdaBelief(std::vector<std::pair<std::string, Tensor>>& params, double lr,
                     double beta1, double beta2, double eps)
    : params_(&params), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (auto& [name, p] : params) {
    m_.emplace_back(p.size(), 0.0);
    s_.emplace_back(p.size(), 0.0);
  }
}

void AdaBelief::zero_grad() {
  for (auto& [name, p] : *params_) p.zero_grad();
}

void AdaBelief::step() {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, double(t_));
  double bc2 = 1.0 - std::pow(beta2_, double(t_));
  for (std::size_t i = 0; i < params_->size(); ++i) {
    Tensor& p = (*params_)[i].second;
    auto grad = p.grad();
    if (grad.empty()) continue;
    auto data = p.mutable_data();
    auto& m = m_[i];
    auto& s = s_[i];
    for (std::size_t j = 0; j < data.size(); ++j) {
      double g = grad[j];
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g;
      double dev = g - m[j];
      s[j] = beta2_ * s[j] + (1.0 - beta2_) * dev * dev + eps_;
      double m_hat = m[j] / bc1;
      double s_hat = s[j] / bc2;
      data[j] -= lr_ * m_hat / (std::sqrt(s_hat) + eps_);
    }
  }
}

namespace {

struct BatchScores {
  Tensor re;
  Tensor p;
  std::vector<int> labels;
};

BatchScores score_windows(const Model& model, const GraphSeries& series,
                          const std::vector<WindowSample>& windows, std::size_t begin,
                          std::size_t end, bool training, std::uint64_t step) {
  std::vector<Tensor> re_parts, p_parts;
  std::vector<int> labels;
  for (std::size_t w = begin; w < end; ++w) {
    WindowTensors wt = model.window_tensors(series, windows[w]);
    Reconstruction r = model.forward(wt, training, step * 7919 + w);
    Tensor sq = model.squared_residual(wt, r);
    re_parts.push_back(model.reconstruction_error(sq));
    p_parts.push_back(model.class_probabilities(sq));
    labels.insert(labels.end(), windows[w].labels.begin(), windows[w].labels.end());
  }
  return {concat_rows(re_parts), concat_rows(p_parts), std::move(labels)};
}

double validation_loss(const Model& model, const GraphSeries& series,
                       const std::vector<WindowSample>& val_windows, const LossConfig& cfg) {
  NoGradGuard no_grad;
  BatchScores s = score_windows(model, series, val_windows, 0, val_windows.size(), false, 0);
  Tensor l1 = loss_l1(s.re, s.labels, cfg.eta, cfg.guard_eps);
  Tensor l2 = loss_l2(s.p, s.labels, cfg.n_a, cfg.n_n, cfg.guard_eps);
  return 0.5 * l1.item() + 0.5 * l2.item();
}

}  // namespace

TrainResult train_model(Model& model, const GraphSeries& series,
                        const std::vector<WindowSample>& train_windows,
                        const std::vector<WindowSample>& val_windows, const LossConfig& cfg) {
  if (train_windows.empty()) throw std::invalid_argument("train_model: no training windows");
  if (val_windows.empty()) throw std::invalid_argument("train_model: no validation windows");
  if (cfg.batch_size == 0) throw std::invalid_argument("train_model: batch_size must be >= 1");

  AdaBelief opt(model.parameters(), cfg.lr);
  TrainResult result;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best_params;
  std::size_t since_best = 0;
  std::uint64_t seed = model.config().seed;

  std::vector<std::size_t> order(train_windows.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double lr = cfg.lr * std::pow(cfg.lr_decay, double(epoch - 1));
    opt.set_lr(lr);
    std::shuffle(order.begin(), order.end(), std::mt19937_64(seed * 2654435761ULL + epoch));

    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::size_t stop = std::min(start + cfg.batch_size, order.size());
      std::vector<WindowSample> batch;
      for (std::size_t w = start; w < stop; ++w) batch.push_back(train_windows[order[w]]);

      std::uint64_t step = epoch * 100000 + batches;
      BatchScores s = score_windows(model, series, batch, 0, batch.size(), true, step);
      Tensor l1 = loss_l1(s.re, s.labels, cfg.eta, cfg.guard_eps);
      Tensor l2 = loss_l2(s.p, s.labels, cfg.n_a, cfg.n_n, cfg.guard_eps);
      Tensor loss = combined_loss(l1, l2, epoch);
      double value = loss.item();
      if (!std::isfinite(value))
        throw std::runtime_error("train_model: non-finite training loss at epoch " +
                                 std::to_string(epoch) + ", batch " +
                                 std::to_string(batches));
      opt.zero_grad();
      loss.backward();
      opt.step();
      epoch_loss += value;
      ++batches;
    }
    epoch_loss /= double(batches);

    double val = validation_loss(model, series, val_windows, cfg);
    if (!std::isfinite(val))
      throw std::runtime_error("train_model: non-finite validation loss at epoch " +
                               std::to_string(epoch));
    result.history.push_back({epoch, epoch_loss, val, lr});

    if (val < best_val - 1e-12) {
      best_val = val;
      result.best_epoch = epoch;
      since_best = 0;
      best_params.clear();
      for (auto& [name, p] : model.parameters())
        best_params.emplace_back(p.data().begin(), p.data().end());
    } else if (++since_best >= cfg.patience) {
      result.early_stopped = true;
      break;
    }
  }

  result.best_val_loss = best_val;
  if (!best_params.empty())
    for (std::size_t i = 0; i < best_params.size(); ++i) {
      auto dst = model.parameters()[i].second.mutable_data();
      std::copy(best_params[i].begin(), best_params[i].end(), dst.begin());
    }
  return result;
}

}  // namespace mstgad
