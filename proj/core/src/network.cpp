#include "mstgad/network.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace mstgad {

void ModelConfig::validate() const {
  if (encoder_layers < 1 || decoder_layers < 1)
    throw std::invalid_argument("ModelConfig: need at least one encoder and decoder layer");
  if (heads < 1 || d_model % heads != 0)
    throw std::invalid_argument("ModelConfig: d_model must divide evenly into heads");
  if (window < 1) throw std::invalid_argument("ModelConfig: window must be >= 1");
  if (n < 1) throw std::invalid_argument("ModelConfig: n must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0)
    throw std::invalid_argument("ModelConfig: dropout must be in [0, 1)");
}

Tensor sinusoidal_positional_encoding(std::size_t k, std::size_t d) {
  Tensor pe = Tensor::zeros({k, d});
  auto data = pe.mutable_data();
  for (std::size_t t = 0; t < k; ++t)
    for (std::size_t i = 0; i < d; ++i) {
      double angle = double(t) / std::pow(10000.0, double(2 * (i / 2)) / double(d));
      data[t * d + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  return pe;
}

namespace {

// Construction-time RNG threaded through parameter creation.
thread_local std::mt19937_64* g_init_rng = nullptr;

Tensor broadcast_positional(const Tensor& pe, std::size_t entities) {
  std::size_t k = pe.rows(), d = pe.cols();
  Tensor out = Tensor::zeros({k * entities, d});
  auto data = out.mutable_data();
  for (std::size_t t = 0; t < k; ++t)
    for (std::size_t e = 0; e < entities; ++e)
      for (std::size_t f = 0; f < d; ++f) data[(t * entities + e) * d + f] = pe.at(t, f);
  return out;
}

}  // namespace

Tensor Model::param(const std::string& name, std::vector<std::size_t> shape,
                    double init_scale) {
  std::size_t size = 1;
  for (auto s : shape) size *= s;
  std::vector<double> data(size);
  std::uniform_real_distribution<double> dist(-init_scale, init_scale);
  for (auto& v : data) v = dist(*g_init_rng);
  Tensor t = Tensor::from_data(std::move(shape), std::move(data), true);
  params_.emplace_back(name, t);
  return t;
}

Tensor Model::const_param(const std::string& name, std::vector<std::size_t> shape,
                          double value) {
  Tensor t = Tensor::full(std::move(shape), value, true);
  params_.emplace_back(name, t);
  return t;
}

namespace {
double xavier(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / double(fan_in + fan_out));
}
}  // namespace

AttentionParams Model::make_attention(const std::string& prefix) {
  std::size_t d = cfg_.d_model, h = cfg_.heads, dh = d / h;
  AttentionParams p;
  for (std::size_t i = 0; i < h; ++i) {
    std::string hp = prefix + ".h" + std::to_string(i);
    p.heads.push_back({param(hp + ".wq", {d, dh}, xavier(d, dh)),
                       param(hp + ".wk", {d, dh}, xavier(d, dh)),
                       param(hp + ".wv", {d, dh}, xavier(d, dh))});
  }
  p.w_o = param(prefix + ".wo", {h * dh, d}, xavier(h * dh, d));
  return p;
}

GraphMultiHeadParams Model::make_graph_attention(const std::string& prefix, std::size_t fe) {
  std::size_t d = cfg_.d_model, h = cfg_.heads, dh = d / h;
  std::size_t hidden = 3 * dh;
  std::size_t in = 2 * d + fe;
  GraphMultiHeadParams p;
  for (std::size_t i = 0; i < h; ++i) {
    std::string hp = prefix + ".h" + std::to_string(i);
    p.heads.push_back({param(hp + ".wc", {hidden, in}, xavier(in, hidden)),
                       param(hp + ".beta", {hidden, 1}, xavier(hidden, 1)),
                       param(hp + ".wv", {dh, d}, xavier(d, dh))});
  }
  p.w_o = param(prefix + ".wo", {h * dh, d}, xavier(h * dh, d));
  return p;
}

Model::LayerNormParams Model::make_norm(const std::string& prefix) {
  return {const_param(prefix + ".gain", {cfg_.d_model}, 1.0),
          const_param(prefix + ".bias", {cfg_.d_model}, 0.0)};
}

Model::ModalityNorms Model::make_modality_norms(const std::string& prefix) {
  return {make_norm(prefix + ".m"), make_norm(prefix + ".l"), make_norm(prefix + ".s")};
}

Model::FfnParams Model::make_ffn(const std::string& prefix) {
  std::size_t d = cfg_.d_model, w = cfg_.ffn_width();
  return {param(prefix + ".w1", {d, w}, xavier(d, w)), const_param(prefix + ".b1", {w}, 0.0),
          param(prefix + ".w2", {w, d}, xavier(w, d)), const_param(prefix + ".b2", {d}, 0.0)};
}

Model::SamParams Model::make_sam(const std::string& prefix) {
  std::size_t d = cfg_.d_model;
  SamParams p;
  p.w_fuse = param(prefix + ".fuse", {2 * d, d}, xavier(2 * d, d));
  p.node_attn = make_graph_attention(prefix + ".node", d);
  p.edge_attn = make_graph_attention(prefix + ".edge", d);
  p.head_metric = param(prefix + ".head_m", {d, d}, xavier(d, d));
  p.head_log = param(prefix + ".head_l", {d, d}, xavier(d, d));
  p.head_trace = param(prefix + ".head_s", {d, d}, xavier(d, d));
  return p;
}

Model::TamParams Model::make_tam(const std::string& prefix) {
  return {make_attention(prefix + ".m"), make_attention(prefix + ".l"),
          make_attention(prefix + ".s")};
}

Model::Model(ModelConfig cfg, GraphTopology topo) : cfg_(cfg), topo_(std::move(topo)) {
  cfg_.validate();
  if (topo_.n != cfg_.n)
    throw std::invalid_argument("Model: topology has " + std::to_string(topo_.n) +
                                " nodes, config says " + std::to_string(cfg_.n));
  std::mt19937_64 rng(cfg_.seed);
  g_init_rng = &rng;

  std::size_t n = cfg_.n, ne = topo_.edge_count(), d = cfg_.d_model, k = cfg_.window;

  // Constant structure matrices.
  {
    Tensor agg = Tensor::zeros({n, ne});
    Tensor scat = Tensor::zeros({ne, n});
    Tensor onehot = Tensor::zeros({n * n, ne});
    auto a = agg.mutable_data();
    auto s = scat.mutable_data();
    auto o = onehot.mutable_data();
    for (std::size_t e = 0; e < ne; ++e) {
      auto [src, dst] = topo_.edges[e];
      a[src * ne + e] += 1.0;
      if (dst != src) a[dst * ne + e] += 1.0;
      if (src == dst) {
        s[e * n + src] = 1.0;
      } else {
        s[e * n + src] = 0.5;
        s[e * n + dst] = 0.5;
      }
      o[(src * n + dst) * ne + e] = 1.0;
    }
    agg_matrix_ = agg;
    scatter_matrix_ = scat;
    edge_onehot_ = onehot;
  }
  Tensor pe = sinusoidal_positional_encoding(k, d);
  positional_nodes_ = broadcast_positional(pe, n);
  positional_edges_ = broadcast_positional(pe, ne);
  causal_nodes_ = causal_mask(k);

  time_major_from_node_major_.resize(k * n);
  for (std::size_t t = 0; t < k; ++t)
    for (std::size_t i = 0; i < n; ++i) time_major_from_node_major_[t * n + i] = i * k + t;

  embed_metric_ = param("embed.m", {cfg_.f_m, d}, xavier(cfg_.f_m + 1, d));
  embed_log_ = param("embed.l", {cfg_.f_l, d}, xavier(cfg_.f_l + 1, d));
  embed_trace_ = param("embed.s", {cfg_.f_s, d}, xavier(cfg_.f_s + 1, d));

  for (std::size_t i = 0; i < cfg_.encoder_layers; ++i) {
    std::string p = "enc" + std::to_string(i);
    encoder_.push_back({make_sam(p + ".sam"), make_tam(p + ".tam"), make_ffn(p + ".ffn"),
                        make_modality_norms(p + ".n1"), make_modality_norms(p + ".n2"),
                        make_modality_norms(p + ".n3")});
  }
  for (std::size_t i = 0; i < cfg_.decoder_layers; ++i) {
    std::string p = "dec" + std::to_string(i);
    decoder_.push_back({make_sam(p + ".sam"), make_tam(p + ".tam"), make_tam(p + ".cam"),
                        make_ffn(p + ".ffn"), make_modality_norms(p + ".n1"),
                        make_modality_norms(p + ".n2"), make_modality_norms(p + ".n3"),
                        make_modality_norms(p + ".n4")});
  }

  out_metric_ = param("out.m", {d, cfg_.f_m}, xavier(d, cfg_.f_m + 1));
  out_log_ = param("out.l", {d, cfg_.f_l}, xavier(d, cfg_.f_l + 1));
  out_trace_ = param("out.s", {d, cfg_.f_s}, xavier(d, cfg_.f_s + 1));

  std::size_t ftot = cfg_.f_m + cfg_.f_l + cfg_.f_s;
  if (cfg_.f_s > 0)
    trace_residual_proj_ =
        param("resid.ws", {n * cfg_.f_s, cfg_.f_s}, xavier(n * cfg_.f_s, cfg_.f_s));
  mlp_w1_ = param("mlp.w1", {ftot, d}, xavier(ftot, d));
  mlp_b1_ = const_param("mlp.b1", {d}, 0.0);
  mlp_w2_ = param("mlp.w2", {d, 2}, xavier(d, 2));
  mlp_b2_ = const_param("mlp.b2", {2}, 0.0);

  g_init_rng = nullptr;
}

WindowTensors Model::window_tensors(const GraphSeries& series,
                                    const WindowSample& sample) const {
  std::size_t k = cfg_.window, n = cfg_.n, ne = topo_.edge_count();
  if (sample.k != k)
    throw std::invalid_argument("window_tensors: sample window size mismatch");
  if (sample.last + 1 < k || sample.last >= series.graphs.size())
    throw std::invalid_argument("window_tensors: sample range out of bounds");

  std::vector<double> m(k * n * cfg_.f_m), l(k * n * cfg_.f_l), s(k * ne * cfg_.f_s);
  for (std::size_t p = 0; p < k; ++p) {
    const MstGraph& g = series.graphs[sample.last - k + 1 + p];
    if (g.n != n || g.f_m != cfg_.f_m || g.f_l != cfg_.f_l || g.f_s != cfg_.f_s)
      throw std::invalid_argument("window_tensors: graph shape mismatch vs model config");
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t f = 0; f < cfg_.f_m; ++f)
        m[((p * n + i) * cfg_.f_m) + f] = g.node(i, f);
      for (std::size_t f = 0; f < cfg_.f_l; ++f)
        l[((p * n + i) * cfg_.f_l) + f] = g.node(i, cfg_.f_m + f);
    }
    for (std::size_t e = 0; e < ne; ++e) {
      auto [i, j] = topo_.edges[e];
      for (std::size_t r = 0; r < cfg_.f_s; ++r)
        s[(p * ne + e) * cfg_.f_s + r] = g.edge(i, j, r);
    }
  }
  const MstGraph& last = series.graphs[sample.last];
  std::vector<double> ml(n * cfg_.f_m), ll(n * cfg_.f_l), dense(n * n * cfg_.f_s);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < cfg_.f_m; ++f) ml[i * cfg_.f_m + f] = last.node(i, f);
    for (std::size_t f = 0; f < cfg_.f_l; ++f) ll[i * cfg_.f_l + f] = last.node(i, cfg_.f_m + f);
  }
  dense = last.edge_features;

  WindowTensors w;
  w.metric = Tensor::from_data({k * n, cfg_.f_m}, std::move(m));
  w.log = Tensor::from_data({k * n, cfg_.f_l}, std::move(l));
  w.trace_edges = Tensor::from_data({k * ne, cfg_.f_s}, std::move(s));
  w.metric_last = Tensor::from_data({n, cfg_.f_m}, std::move(ml));
  w.log_last = Tensor::from_data({n, cfg_.f_l}, std::move(ll));
  w.dense_trace_last = Tensor::from_data({n * n, cfg_.f_s}, std::move(dense));
  return w;
}

namespace {
// Decoder input: window shifted one timestamp right, zero padding first.
Tensor shift_blocks_right(const Tensor& x, std::size_t k) {
  std::size_t rows = x.rows(), width = x.cols();
  std::size_t block = rows / k;
  std::vector<double> data(rows * width, 0.0);
  for (std::size_t p = 1; p < k; ++p)
    for (std::size_t r = 0; r < block * width; ++r)
      data[p * block * width + r] = x.data()[(p - 1) * block * width + r];
  return Tensor::from_data({rows, width}, std::move(data));
}
}  // namespace

Streams Model::input_embedding(const WindowTensors& w, bool shifted_decoder_input) const {
  Tensor m = w.metric, l = w.log, s = w.trace_edges;
  if (shifted_decoder_input) {
    m = shift_blocks_right(m, cfg_.window);
    l = shift_blocks_right(l, cfg_.window);
    s = shift_blocks_right(s, cfg_.window);
  }
  Streams out;
  out.metric = add(matmul(m, embed_metric_), positional_nodes_);
  out.log = add(matmul(l, embed_log_), positional_nodes_);
  out.trace = add(matmul(s, embed_trace_), positional_edges_);
  return out;
}

Streams Model::norm_residual(const Streams& x, const Streams& delta, const ModalityNorms& nrm,
                             bool training, std::uint64_t step) const {
  auto drop = [&](const Tensor& t) {
    return dropout(t, cfg_.dropout, training, cfg_.seed, step * 1000003ULL + dropout_site_++);
  };
  Streams out;
  out.metric = layer_norm_rows(add(x.metric, drop(delta.metric)), nrm.metric.gain,
                               nrm.metric.bias);
  out.log = layer_norm_rows(add(x.log, drop(delta.log)), nrm.log.gain, nrm.log.bias);
  out.trace = layer_norm_rows(add(x.trace, drop(delta.trace)), nrm.trace.gain, nrm.trace.bias);
  return out;
}

Streams Model::ffn_apply(const Streams& x, const FfnParams& f) const {
  auto apply = [&](const Tensor& t) {
    Tensor h = leaky_relu(add_rowvec(matmul(t, f.w1), f.b1));
    return add_rowvec(matmul(h, f.w2), f.b2);
  };
  return {apply(x.metric), apply(x.log), apply(x.trace)};
}

const Model::SamParams& Model::sam_params(bool decoder, std::size_t layer) const {
  return decoder ? decoder_.at(layer).sam : encoder_.at(layer).sam;
}

Streams Model::sam(const Streams& x, bool decoder, std::size_t layer, bool, std::uint64_t) const {
  const SamParams& p = sam_params(decoder, layer);
  std::size_t k = cfg_.window, n = cfg_.n, ne = topo_.edge_count();
  std::vector<Tensor> m_out, l_out, s_out;
  m_out.reserve(k);
  l_out.reserve(k);
  s_out.reserve(k);
  for (std::size_t t = 0; t < k; ++t) {
    std::vector<std::size_t> node_rows(n), edge_rows(ne);
    for (std::size_t i = 0; i < n; ++i) node_rows[i] = t * n + i;
    for (std::size_t e = 0; e < ne; ++e) edge_rows[e] = t * ne + e;
    Tensor m_t = select_rows(x.metric, node_rows);
    Tensor l_t = select_rows(x.log, node_rows);
    Tensor e_t = select_rows(x.trace, edge_rows);
    Tensor node_in = matmul(concat_cols({m_t, l_t}), p.w_fuse);
    Tensor node_up = graph_node_attention_multihead(node_in, e_t, topo_, p.node_attn);
    Tensor edge_up = graph_edge_attention_multihead(e_t, node_up, topo_, p.edge_attn);
    m_out.push_back(matmul(node_up, p.head_metric));
    l_out.push_back(matmul(node_up, p.head_log));
    s_out.push_back(matmul(edge_up, p.head_trace));
  }
  return {concat_rows(m_out), concat_rows(l_out), concat_rows(s_out)};
}

Tensor Model::node_trace_aggregate(const Tensor& trace_stream) const {
  std::size_t k = cfg_.window, ne = topo_.edge_count();
  std::vector<Tensor> blocks;
  blocks.reserve(k);
  for (std::size_t t = 0; t < k; ++t) {
    std::vector<std::size_t> rows(ne);
    for (std::size_t e = 0; e < ne; ++e) rows[e] = t * ne + e;
    blocks.push_back(matmul(agg_matrix_, select_rows(trace_stream, rows)));
  }
  return concat_rows(blocks);  // (k*N) x d, time-major
}

Tensor Model::scatter_to_edges(const Tensor& node_stream) const {
  std::size_t k = cfg_.window, n = cfg_.n;
  std::vector<Tensor> blocks;
  blocks.reserve(k);
  for (std::size_t t = 0; t < k; ++t) {
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = t * n + i;
    blocks.push_back(matmul(scatter_matrix_, select_rows(node_stream, rows)));
  }
  return concat_rows(blocks);  // (k*Ne) x d
}

Streams Model::tam(const Streams& x, bool decoder, std::size_t layer, bool,
                   std::uint64_t) const {
  const TamParams& p = decoder ? decoder_.at(layer).tam : encoder_.at(layer).tam;
  const Tensor* mask = decoder ? &causal_nodes_ : nullptr;
  std::size_t k = cfg_.window, n = cfg_.n;
  Tensor trace_nodes = node_trace_aggregate(x.trace);

  std::vector<Tensor> m_out, l_out, s_out;
  m_out.reserve(n);
  l_out.reserve(n);
  s_out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> rows(k);
    for (std::size_t t = 0; t < k; ++t) rows[t] = t * n + i;
    Tensor m_i = select_rows(x.metric, rows);
    Tensor l_i = select_rows(x.log, rows);
    Tensor s_i = select_rows(trace_nodes, rows);
    Tensor c = build_shared_score(m_i, l_i, s_i);
    m_out.push_back(multi_head(m_i, m_i, m_i, p.metric, mask, &c));
    l_out.push_back(multi_head(l_i, l_i, l_i, p.log, mask, &c));
    s_out.push_back(multi_head(s_i, s_i, s_i, p.trace, mask, &c));
  }
  Tensor metric = select_rows(concat_rows(m_out), time_major_from_node_major_);
  Tensor log_s = select_rows(concat_rows(l_out), time_major_from_node_major_);
  Tensor trace_n = select_rows(concat_rows(s_out), time_major_from_node_major_);
  return {metric, log_s, scatter_to_edges(trace_n)};
}

Streams Model::cam(const Streams& x, const Streams& z, std::size_t layer, bool,
                   std::uint64_t) const {
  const TamParams& p = decoder_.at(layer).cam;
  std::size_t k = cfg_.window, n = cfg_.n;
  Tensor dec_trace_nodes = node_trace_aggregate(x.trace);
  Tensor enc_trace_nodes = node_trace_aggregate(z.trace);

  std::vector<Tensor> m_out, l_out, s_out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> rows(k);
    for (std::size_t t = 0; t < k; ++t) rows[t] = t * n + i;
    Tensor qm = select_rows(x.metric, rows), km = select_rows(z.metric, rows);
    Tensor ql = select_rows(x.log, rows), kl = select_rows(z.log, rows);
    Tensor qs = select_rows(dec_trace_nodes, rows), ks = select_rows(enc_trace_nodes, rows);
    m_out.push_back(multi_head(qm, km, km, p.metric));
    l_out.push_back(multi_head(ql, kl, kl, p.log));
    s_out.push_back(multi_head(qs, ks, ks, p.trace));
  }
  Tensor metric = select_rows(concat_rows(m_out), time_major_from_node_major_);
  Tensor log_s = select_rows(concat_rows(l_out), time_major_from_node_major_);
  Tensor trace_n = select_rows(concat_rows(s_out), time_major_from_node_major_);
  return {metric, log_s, scatter_to_edges(trace_n)};
}

Streams Model::encode(const Streams& embedded, bool training, std::uint64_t step) const {
  Streams x = embedded;
  for (std::size_t i = 0; i < cfg_.encoder_layers; ++i) {
    const EncoderLayer& layer = encoder_[i];
    if (cfg_.use_sam) x = norm_residual(x, sam(x, false, i, training, step), layer.norm_sam,
                                        training, step);
    if (cfg_.use_tam) x = norm_residual(x, tam(x, false, i, training, step), layer.norm_tam,
                                        training, step);
    x = norm_residual(x, ffn_apply(x, layer.ffn), layer.norm_ffn, training, step);
  }
  return x;
}

Reconstruction Model::decode(const Streams& dec_embedded, const Streams& z, bool training,
                             std::uint64_t step) const {
  Streams x = dec_embedded;
  for (std::size_t i = 0; i < cfg_.decoder_layers; ++i) {
    const DecoderLayer& layer = decoder_[i];
    if (cfg_.use_sam) x = norm_residual(x, sam(x, true, i, training, step), layer.norm_sam,
                                        training, step);
    if (cfg_.use_tam) x = norm_residual(x, tam(x, true, i, training, step), layer.norm_tam,
                                        training, step);
    x = norm_residual(x, cam(x, z, i, training, step), layer.norm_cam, training, step);
    x = norm_residual(x, ffn_apply(x, layer.ffn), layer.norm_ffn, training, step);
  }
  std::size_t k = cfg_.window, n = cfg_.n, ne = topo_.edge_count();
  std::vector<std::size_t> last_nodes(n), last_edges(ne);
  for (std::size_t i = 0; i < n; ++i) last_nodes[i] = (k - 1) * n + i;
  for (std::size_t e = 0; e < ne; ++e) last_edges[e] = (k - 1) * ne + e;
  Reconstruction r;
  r.metric = matmul(select_rows(x.metric, last_nodes), out_metric_);
  r.log = matmul(select_rows(x.log, last_nodes), out_log_);
  r.trace_edges = matmul(select_rows(x.trace, last_edges), out_trace_);
  return r;
}

Reconstruction Model::forward(const WindowTensors& w, bool training, std::uint64_t step) const {
  dropout_site_ = 0;
  Streams enc_in = input_embedding(w, false);
  Streams z = encode(enc_in, training, step);
  Streams dec_in = input_embedding(w, true);
  return decode(dec_in, z, training, step);
}

Tensor Model::squared_residual(const WindowTensors& w, const Reconstruction& r) const {
  Tensor dm = sub(w.metric_last, r.metric);
  Tensor dl = sub(w.log_last, r.log);
  std::vector<Tensor> parts = {dm, dl};
  if (cfg_.f_s > 0) {
    Tensor dense_recon = matmul(edge_onehot_, r.trace_edges);  // (N*N) x F_s
    Tensor ds = sub(w.dense_trace_last, dense_recon);
    Tensor flat = reshape(ds, {cfg_.n, cfg_.n * cfg_.f_s});
    parts.push_back(matmul(flat, trace_residual_proj_));
  }
  Tensor res = concat_cols(parts);
  return mul(res, res);
}

Tensor Model::reconstruction_error(const Tensor& squared_residual) const {
  return row_sums(squared_residual);
}

Tensor Model::class_probabilities(const Tensor& squared_residual) const {
  Tensor h = leaky_relu(add_rowvec(matmul(squared_residual, mlp_w1_), mlp_b1_));
  return softmax_rows(add_rowvec(matmul(h, mlp_w2_), mlp_b2_));
}

}  // namespace mstgad
