#include "mstgad/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace mstgad {

namespace {

using detail::TensorImpl;

std::shared_ptr<TensorImpl> make_impl(std::vector<std::size_t> shape,
                                      std::vector<double> data, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return impl;
}

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

// 2-D view helpers: 1-D tensors count as a single row.
std::size_t view_rows(const TensorImpl& t) {
  return t.shape.size() >= 2 ? t.shape[0] : 1;
}
std::size_t view_cols(const TensorImpl& t) {
  if (t.shape.empty()) return 1;
  return t.shape.size() >= 2 ? t.shape[t.shape.size() - 1] : t.shape[0];
}

struct OpBuilder {
  std::shared_ptr<TensorImpl> out;
  explicit OpBuilder(std::vector<std::size_t> shape) {
    out = make_impl(std::move(shape), {}, false);
    out->data.assign(shape_product(out->shape), 0.0);
  }
  void depends_on(const Tensor& t) {
    if (!detail::grad_enabled()) return;
    out->parents.push_back(t.impl());
    if (t.impl()->requires_grad) out->requires_grad = true;
  }
  Tensor finish(std::function<void(TensorImpl&)> backward_fn) {
    if (out->requires_grad) out->backward_fn = std::move(backward_fn);
    return Tensor(out);
  }
};

thread_local bool g_grad_enabled = true;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

namespace detail {
bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool enabled) { g_grad_enabled = enabled; }
}  // namespace detail

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

std::string shape_str(const std::vector<std::size_t>& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

void shape_error(const std::string& op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(op + ": incompatible shapes " + shape_str(a.shape()) +
                              " vs " + shape_str(b.shape()));
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  std::size_t n = shape_product(shape);
  return Tensor(make_impl(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value, bool requires_grad) {
  std::size_t n = shape_product(shape);
  return Tensor(make_impl(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from_data(std::vector<std::size_t> shape, std::vector<double> data,
                         bool requires_grad) {
  if (shape_product(shape) != data.size())
    throw std::invalid_argument("from_data: shape " + shape_str(shape) +
                                " does not match data length " + std::to_string(data.size()));
  return Tensor(make_impl(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

std::size_t Tensor::rows() const { return view_rows(*impl_); }
std::size_t Tensor::cols() const { return view_cols(*impl_); }

std::span<const double> Tensor::grad() const {
  impl_->ensure_grad();
  return impl_->grad;
}

double Tensor::item() const {
  if (impl_->data.size() != 1)
    throw std::invalid_argument("item: tensor has " + std::to_string(impl_->data.size()) +
                                " elements");
  return impl_->data[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return impl_->data[r * cols() + c];
}

void Tensor::zero_grad() {
  impl_->grad.assign(impl_->data.size(), 0.0);
  impl_->backward_done = false;
}

void Tensor::backward() {
  if (impl_->data.size() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_str(impl_->shape));
  if (impl_->backward_done)
    throw std::logic_error("backward: already called on this node; reset first");
  impl_->backward_done = true;

  // Reverse topological order over the tape.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> seen;
  std::vector<std::pair<TensorImpl*, std::size_t>> stack{{impl_.get(), 0}};
  seen.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorImpl* p = node->parents[next++].get();
      if (seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  impl_->ensure_grad();
  impl_->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* node = *it;
    if (node->backward_fn && node->requires_grad) node->backward_fn(*node);
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.cols() != b.rows())
    shape_error("matmul", a, b);
  std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  OpBuilder op({m, n});
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  double* od = op.out->data.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      double av = ad[i * k + p];
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) od[i * n + j] += av * bd[p * n + j];
    }
  op.depends_on(a);
  op.depends_on(b);
  auto ai = a.impl(), bi = b.impl();
  return op.finish([ai, bi, m, k, n](detail::TensorImpl& out) {
    if (ai->requires_grad) {
      ai->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          double g = out.grad[i * n + j];
          if (g == 0.0) continue;
          for (std::size_t p = 0; p < k; ++p) ai->grad[i * k + p] += g * bi->data[p * n + j];
        }
    }
    if (bi->requires_grad) {
      bi->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double av = ai->data[i * k + p];
          if (av == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) bi->grad[p * n + j] += av * out.grad[i * n + j];
        }
    }
  });
}

Tensor transpose(const Tensor& a) {
  if (a.shape().size() != 2)
    throw std::invalid_argument("transpose: need 2-D tensor, got " + shape_str(a.shape()));
  std::size_t m = a.rows(), n = a.cols();
  OpBuilder op({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) op.out->data[j * m + i] = a.at(i, j);
  op.depends_on(a);
  auto ai = a.impl();
  return op.finish([ai, m, n](detail::TensorImpl& out) {
    ai->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ai->grad[i * n + j] += out.grad[j * m + i];
  });
}

namespace {
Tensor elementwise_binary(const char* name, const Tensor& a, const Tensor& b,
                          double (*fwd)(double, double), double da, double db) {
  if (a.shape() != b.shape()) shape_error(name, a, b);
  OpBuilder op(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i)
    op.out->data[i] = fwd(a.data()[i], b.data()[i]);
  op.depends_on(a);
  op.depends_on(b);
  auto ai = a.impl(), bi = b.impl();
  return op.finish([ai, bi, da, db](detail::TensorImpl& out) {
    if (ai->requires_grad) {
      ai->ensure_grad();
      for (std::size_t i = 0; i < out.grad.size(); ++i) ai->grad[i] += da * out.grad[i];
    }
    if (bi->requires_grad) {
      bi->ensure_grad();
      for (std::size_t i = 0; i < out.grad.size(); ++i) bi->grad[i] += db * out.grad[i];
    }
  });
}
}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise_binary("add", a, b, [](double x, double y) { return x + y; }, 1.0, 1.0);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise_binary("sub", a, b, [](double x, double y) { return x - y; }, 1.0, -1.0);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("mul", a, b);
  OpBuilder op(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) op.out->data[i] = a.data()[i] * b.data()[i];
  op.depends_on(a);
  op.depends_on(b);
  auto ai = a.impl(), bi = b.impl();
  return op.finish([ai, bi](detail::TensorImpl& out) {
    if (ai->requires_grad) {
      ai->ensure_grad();
      for (std::size_t i = 0; i < out.grad.size(); ++i) ai->grad[i] += bi->data[i] * out.grad[i];
    }
    if (bi->requires_grad) {
      bi->ensure_grad();
      for (std::size_t i = 0; i < out.grad.size(); ++i) bi->grad[i] += ai->data[i] * out.grad[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  OpBuilder op(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) op.out->data[i] = a.data()[i] * s;
  op.depends_on(a);
  auto ai = a.impl();
  return op.finish([ai, s](detail::TensorImpl& out) {
    ai->ensure_grad();
    for (std::size_t i = 0; i < out.grad.size(); ++i) ai->grad[i] += s * out.grad[i];
  });
}

Tensor add_scalar(const Tensor& a, double s) {
  OpBuilder op(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) op.out->data[i] = a.data()[i] + s;
  op.depends_on(a);
  auto ai = a.impl();
  return op.finish([ai](detail::TensorImpl& out) {
    ai->ensure_grad();
    for (std::size_t i = 0; i < out.grad.size(); ++i) ai->grad[i] += out.grad[i];
  });
}

Tensor add_rowvec(const Tensor& a, const Tensor& v) {
  if (v.size() != a.cols()) shape_error("add_rowvec", a, v);
  std::size_t m = a.rows(), n = a.cols();
  OpBuilder op(a.shape());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      op.out->data[i * n + j] = a.data()[i * n + j] + v.data()[j];
  op.depends_on(a);
  op.depends_on(v);
  auto ai = a.impl(), vi = v.impl();
  return op.finish([ai, vi, m, n](detail::TensorImpl& out) {
    if (ai->requires_grad) {
      ai->ensure_grad();
      for (std::size_t i = 0; i < out.grad.size(); ++i) ai->grad[i] += out.grad[i];
    }
    if (vi->requires_grad) {
      vi->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) vi->grad[j] += out.grad[i * n + j];
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
  std::size_t m = parts[0].rows(), total = 0;
  for (const auto& p : parts) {
    if (p.rows() != m) shape_error("concat_cols", parts[0], p);
    total += p.cols();
  }
  OpBuilder op({m, total});
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::size_t n = p.cols();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) op.out->data[i * total + off + j] = p.at(i, j);
    off += n;
    op.depends_on(p);
  }
  std::vector<std::shared_ptr<detail::TensorImpl>> impls;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    impls.push_back(p.impl());
    widths.push_back(p.cols());
  }
  return op.finish([impls, widths, m, total](detail::TensorImpl& out) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < impls.size(); ++k) {
      std::size_t n = widths[k];
      if (impls[k]->requires_grad) {
        impls[k]->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j)
            impls[k]->grad[i * n + j] += out.grad[i * total + off + j];
      }
      off += n;
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
  std::size_t n = parts[0].cols(), total = 0;
  for (const auto& p : parts) {
    if (p.cols() != n) shape_error("concat_rows", parts[0], p);
    total += p.rows();
  }
  OpBuilder op({total, n});
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.data().begin(), p.data().end(), op.out->data.begin() + off * n);
    off += p.rows();
    op.depends_on(p);
  }
  std::vector<std::shared_ptr<detail::TensorImpl>> impls;
  std::vector<std::size_t> heights;
  for (const auto& p : parts) {
    impls.push_back(p.impl());
    heights.push_back(p.rows());
  }
  return op.finish([impls, heights, n](detail::TensorImpl& out) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < impls.size(); ++k) {
      if (impls[k]->requires_grad) {
        impls[k]->ensure_grad();
        for (std::size_t i = 0; i < heights[k] * n; ++i)
          impls[k]->grad[i] += out.grad[off * n + i];
      }
      off += heights[k];
    }
  });
}

Tensor softmax_rows(const Tensor& a) {
  std::size_t m = a.rows(), n = a.cols();
  OpBuilder op(a.shape());
  for (std::size_t i = 0; i < m; ++i) {
    double mx = a.data()[i * n];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, a.data()[i * n + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double e = std::exp(a.data()[i * n + j] - mx);
      op.out->data[i * n + j] = e;
      z += e;
    }
    for (std::size_t j = 0; j < n; ++j) op.out->data[i * n + j] /= z;
  }
  op.depends_on(a);
  auto ai = a.impl();
  return op.finish([ai, m, n](detail::TensorImpl& out) {
    ai->ensure_grad();
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += out.grad[i * n + j] * out.data[i * n + j];
      for (std::size_t j = 0; j < n; ++j)
        ai->grad[i * n + j] += out.data[i * n + j] * (out.grad[i * n + j] - dot);
    }
  });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  OpBuilder op(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    double x = a.data()[i];
    op.out->data[i] = x > 0.0 ? x : slope * x;
  }
  op.depends_on(a);
  auto ai = a.impl();
  return op.finish([ai, slope](detail::TensorImpl& out) {
    ai->ensure_grad();
    for (std::size_t i = 0; i < out.grad.size(); ++i)
      ai->grad[i] += (ai->data[i] > 0.0 ? 1.0 : slope) * out.grad[i];
  });
}

Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
  std::size_t m = a.rows(), n = a.cols();
  if (gain.size() != n) shape_error("layer_norm_rows gain", a, gain);
  if (bias.size() != n) shape_error("layer_norm_rows bias", a, bias);
  OpBuilder op(a.shape());
  std::vector<double> means(m), invstd(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += a.data()[i * n + j];
    mu /= double(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double d = a.data()[i * n + j] - mu;
      var += d * d;
    }
    var /= double(n);
    means[i] = mu;
    invstd[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      double xhat = (a.data()[i * n + j] - mu) * invstd[i];
      op.out->data[i * n + j] = xhat * gain.data()[j] + bias.data()[j];
    }
  }
  op.depends_on(a);
  op.depends_on(gain);
  op.depends_on(bias);
  auto ai = a.impl(), gi = gain.impl(), bi = bias.impl();
  return op.finish([ai, gi, bi, m, n, means, invstd](detail::TensorImpl& out) {
    for (std::size_t i = 0; i < m; ++i) {
      // d(out)/d(xhat) = gain; classic layer-norm backward per row.
      std::vector<double> dxhat(n);
      double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        double xhat = (ai->data[i * n + j] - means[i]) * invstd[i];
        dxhat[j] = out.grad[i * n + j] * gi->data[j];
        sum_dxhat += dxhat[j];
        sum_dxhat_xhat += dxhat[j] * xhat;
        if (gi->requires_grad) {
          gi->ensure_grad();
          gi->grad[j] += out.grad[i * n + j] * xhat;
        }
        if (bi->requires_grad) {
          bi->ensure_grad();
          bi->grad[j] += out.grad[i * n + j];
        }
      }
      if (ai->requires_grad) {
        ai->ensure_grad();
        for (std::size_t j = 0; j < n; ++j) {
          double xhat = (ai->data[i * n + j] - means[i]) * invstd[i];
          ai->grad[i * n + j] +=
              invstd[i] * (dxhat[j] - sum_dxhat / double(n) - xhat * sum_dxhat_xhat / double(n));
        }
      }
    }
  });
}

Tensor sum_all(const Tensor& a) {
  OpBuilder op({1});
  double s = 0.0;
  for (double x : a.data()) s += x;
  op.out->data[0] = s;
  op.depends_on(a);
  auto ai = a.impl();
  return op.finish([ai](detail::TensorImpl& out) {
    ai->ensure_grad();
    for (std::size_t i = 0; i < ai->grad.size(); ++i) ai->grad[i] += out.grad[0];
  });
}

Tensor mean_all(const Tensor& a) { return scale(sum_all(a), 1.0 / double(a.size())); }

Tensor row_sums(const Tensor& a) {
  std::size_t m = a.rows(), n = a.cols();
  OpBuilder op({m, 1});
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += a.data()[i * n + j];
    op.out->data[i] = s;
  }
  op.depends_on(a);
  auto ai = a.impl();
  return op.finish([ai, m, n](detail::TensorImpl& out) {
    ai->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ai->grad[i * n + j] += out.grad[i];
  });
}

Tensor masked_fill(const Tensor& a, const Tensor& mask, double value) {
  if (a.shape() != mask.shape()) shape_error("masked_fill", a, mask);
  OpBuilder op(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i)
    op.out->data[i] = mask.data()[i] != 0.0 ? value : a.data()[i];
  op.depends_on(a);
  auto ai = a.impl(), mi = mask.impl();
  return op.finish([ai, mi](detail::TensorImpl& out) {
    ai->ensure_grad();
    for (std::size_t i = 0; i < out.grad.size(); ++i)
      if (mi->data[i] == 0.0) ai->grad[i] += out.grad[i];
  });
}

Tensor dropout(const Tensor& a, double p, bool training, std::uint64_t seed,
               std::uint64_t counter) {
  if (!training || p <= 0.0) {
    // Identity pass-through with its own node so callers can treat it
    // uniformly.
    return scale(a, 1.0);
  }
  if (p >= 1.0) throw std::invalid_argument("dropout: p must be < 1");
  OpBuilder op(a.shape());
  double keep = 1.0 - p;
  auto mask = std::make_shared<std::vector<std::uint8_t>>(a.size());
  std::uint64_t base = splitmix64(seed ^ (counter * 0x632BE59BD9B4E019ULL));
  for (std::size_t i = 0; i < a.size(); ++i) {
    double u = double(splitmix64(base + i) >> 11) * 0x1.0p-53;
    (*mask)[i] = u < keep ? 1 : 0;
    op.out->data[i] = (*mask)[i] ? a.data()[i] / keep : 0.0;
  }
  op.depends_on(a);
  auto ai = a.impl();
  return op.finish([ai, mask, keep](detail::TensorImpl& out) {
    ai->ensure_grad();
    for (std::size_t i = 0; i < out.grad.size(); ++i)
      if ((*mask)[i]) ai->grad[i] += out.grad[i] / keep;
  });
}

Tensor select_rows(const Tensor& a, const std::vector<std::size_t>& indices) {
  std::size_t n = a.cols();
  OpBuilder op({indices.size(), n});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= a.rows())
      throw std::invalid_argument("select_rows: index " + std::to_string(indices[i]) +
                                  " out of range for shape " + shape_str(a.shape()));
    for (std::size_t j = 0; j < n; ++j) op.out->data[i * n + j] = a.at(indices[i], j);
  }
  op.depends_on(a);
  auto ai = a.impl();
  auto idx = indices;
  return op.finish([ai, idx, n](detail::TensorImpl& out) {
    ai->ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < n; ++j) ai->grad[idx[i] * n + j] += out.grad[i * n + j];
  });
}

Tensor repeat_row(const Tensor& row, std::size_t n) {
  if (row.rows() != 1)
    throw std::invalid_argument("repeat_row: need a single row, got " + shape_str(row.shape()));
  std::size_t c = row.cols();
  OpBuilder op({n, c});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) op.out->data[i * c + j] = row.data()[j];
  op.depends_on(row);
  auto ri = row.impl();
  return op.finish([ri, n, c](detail::TensorImpl& out) {
    ri->ensure_grad();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) ri->grad[j] += out.grad[i * c + j];
  });
}

Tensor reciprocal(const Tensor& a) {
  OpBuilder op(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) op.out->data[i] = 1.0 / a.data()[i];
  op.depends_on(a);
  auto ai = a.impl();
  return op.finish([ai](detail::TensorImpl& out) {
    ai->ensure_grad();
    for (std::size_t i = 0; i < out.grad.size(); ++i)
      ai->grad[i] += -out.data[i] * out.data[i] * out.grad[i];
  });
}

Tensor log_elem(const Tensor& a) {
  OpBuilder op(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) op.out->data[i] = std::log(a.data()[i]);
  op.depends_on(a);
  auto ai = a.impl();
  return op.finish([ai](detail::TensorImpl& out) {
    ai->ensure_grad();
    for (std::size_t i = 0; i < out.grad.size(); ++i) ai->grad[i] += out.grad[i] / ai->data[i];
  });
}

Tensor reshape(const Tensor& a, std::vector<std::size_t> shape) {
  if (shape_product(shape) != a.size())
    throw std::invalid_argument("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape) +
                                " changes element count");
  OpBuilder op(shape);
  std::copy(a.data().begin(), a.data().end(), op.out->data.begin());
  op.depends_on(a);
  auto ai = a.impl();
  return op.finish([ai](detail::TensorImpl& out) {
    ai->ensure_grad();
    for (std::size_t i = 0; i < out.grad.size(); ++i) ai->grad[i] += out.grad[i];
  });
}

GradCheckResult grad_check(const std::function<Tensor()>& f,
                           const std::vector<std::pair<std::string, Tensor>>& params,
                           double eps, double tol) {
  GradCheckResult result;
  for (auto& [name, p] : params) const_cast<Tensor&>(p).zero_grad();
  Tensor loss = f();
  loss.backward();
  std::vector<std::vector<double>> analytic;
  for (auto& [name, p] : params)
    analytic.emplace_back(p.grad().begin(), p.grad().end());

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi].second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      double orig = p.mutable_data()[i];
      p.mutable_data()[i] = orig + eps;
      double fp = f().item();
      p.mutable_data()[i] = orig - eps;
      double fm = f().item();
      p.mutable_data()[i] = orig;
      double numeric = (fp - fm) / (2.0 * eps);
      double a = analytic[pi][i];
      double rel = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      ++result.total;
      if (rel > result.worst_rel_error) {
        result.worst_rel_error = rel;
        result.worst_entry = params[pi].first + "[" + std::to_string(i) + "]";
      }
      if (rel > tol) ++result.failed;
    }
  }
  return result;
}

}  // namespace mstgad
