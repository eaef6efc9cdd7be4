#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mstgad {

// Reverse-mode autodiff over dense double tensors. Shapes are mostly 2-D
// (rows x cols); 1-D tensors are treated as a single row where it matters.
// Graph nodes are reference-counted; backward() walks the tape once in
// reverse topological order.

class Tensor;

namespace detail {
bool grad_enabled();
void set_grad_enabled(bool enabled);

struct TensorImpl {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  bool backward_done = false;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(TensorImpl&)> backward_fn;

  std::size_t size() const { return data.size(); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<std::size_t> shape, double value, bool requires_grad = false);
  static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return impl_->shape; }
  std::size_t size() const { return impl_->data.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  bool requires_grad() const { return impl_->requires_grad; }

  std::span<const double> data() const { return impl_->data; }
  std::span<double> mutable_data() { return impl_->data; }
  std::span<const double> grad() const;
  double item() const;
  double at(std::size_t r, std::size_t c) const;

  // Runs reverse-mode accumulation from this scalar. Throws if this tensor
  // is not a scalar or if backward() already ran on this node.
  void backward();
  void zero_grad();

  std::shared_ptr<detail::TensorImpl> impl() const { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

[[noreturn]] void shape_error(const std::string& op, const Tensor& a, const Tensor& b);
std::string shape_str(const std::vector<std::size_t>& s);

// Forward ops. All return fresh nodes; inputs are never mutated.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
// Broadcasts a 1-D (or 1 x c) vector across every row of a.
Tensor add_rowvec(const Tensor& a, const Tensor& v);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor softmax_rows(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope = 0.2);
// Per-row normalization over the feature axis followed by gain/bias affine.
Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias,
                       double eps = 1e-5);
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor row_sums(const Tensor& a);  // rows x cols -> rows x 1
// mask holds 0/1 per entry; entries with mask==1 are replaced by value and
// receive zero gradient.
Tensor masked_fill(const Tensor& a, const Tensor& mask, double value);
Tensor dropout(const Tensor& a, double p, bool training, std::uint64_t seed,
               std::uint64_t counter);
Tensor select_rows(const Tensor& a, const std::vector<std::size_t>& indices);
Tensor repeat_row(const Tensor& row, std::size_t n);
Tensor reciprocal(const Tensor& a);
Tensor log_elem(const Tensor& a);
Tensor reshape(const Tensor& a, std::vector<std::size_t> shape);

// Disables tape construction while in scope; forward values are unchanged
// but backward() cannot reach through ops created under the guard.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Central finite-difference check of d(loss)/d(param) for every entry of
// every parameter. f must rebuild the loss from scratch on each call.
struct GradCheckResult {
  std::size_t total = 0;
  std::size_t failed = 0;
  double worst_rel_error = 0.0;
  std::string worst_entry;
  bool ok(double) const { return failed == 0; }
};
GradCheckResult grad_check(const std::function<Tensor()>& f,
                           const std::vector<std::pair<std::string, Tensor>>& params,
                           double eps = 1e-4, double tol = 1e-3);

}  // namespace mstgad
