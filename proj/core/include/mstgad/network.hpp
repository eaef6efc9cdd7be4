#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mstgad/attention.hpp"
#include "mstgad/graph.hpp"
#include "mstgad/tensor.hpp"

namespace mstgad {

struct ModelConfig {
  std::size_t d_model = 16;
  std::size_t heads = 2;
  std::size_t encoder_layers = 2;
  std::size_t decoder_layers = 2;
  std::size_t window = 10;  // k
  double dropout = 0.2;
  std::size_t n = 0, f_m = 0, f_l = 0, f_s = 0;
  std::size_t ffn_hidden = 0;  // 0 -> 4 * d_model
  std::uint64_t seed = 0;
  // Ablation switches: skipped sublayers leave the residual stream as-is.
  bool use_sam = true;
  bool use_tam = true;

  std::size_t ffn_width() const { return ffn_hidden ? ffn_hidden : 4 * d_model; }
  void validate() const;
};

// Per-modality hidden streams. Node streams are (k*N) x d in time-major
// row order (row t*N + i); the trace stream is (k*Ne) x d over the
// topology's edge list.
struct Streams {
  Tensor metric;
  Tensor log;
  Tensor trace;
};

// Raw window features lifted to constant tensors.
struct WindowTensors {
  Tensor metric;       // (k*N) x F_m
  Tensor log;          // (k*N) x F_l
  Tensor trace_edges;  // (k*Ne) x F_s
  Tensor metric_last;  // N x F_m
  Tensor log_last;     // N x F_l
  Tensor dense_trace_last;  // (N*N) x F_s, zero off-adjacency
};

struct Reconstruction {
  Tensor metric;       // N x F_m
  Tensor log;          // N x F_l
  Tensor trace_edges;  // Ne x F_s (edge-list layout)
};

class Model {
 public:
  Model(ModelConfig cfg, GraphTopology topo);

  const ModelConfig& config() const { return cfg_; }
  const GraphTopology& topology() const { return topo_; }

  WindowTensors window_tensors(const GraphSeries& series, const WindowSample& sample) const;

  Streams input_embedding(const WindowTensors& w, bool shifted_decoder_input) const;
  Streams encode(const Streams& embedded, bool training, std::uint64_t step) const;
  Reconstruction decode(const Streams& dec_embedded, const Streams& z, bool training,
                        std::uint64_t step) const;
  Reconstruction forward(const WindowTensors& w, bool training, std::uint64_t step) const;

  // Squared residual rows: N x (F_m + F_l + F_s); the trace block is the
  // learned projection of the flattened per-instance edge residual.
  Tensor squared_residual(const WindowTensors& w, const Reconstruction& r) const;
  Tensor reconstruction_error(const Tensor& squared_residual) const;  // N x 1
  Tensor class_probabilities(const Tensor& squared_residual) const;   // N x 2, rows sum to 1

  // Exposed sublayers (layer index into encoder or decoder stack).
  Streams sam(const Streams& x, bool decoder, std::size_t layer, bool training,
              std::uint64_t step) const;
  Streams tam(const Streams& x, bool decoder, std::size_t layer, bool training,
              std::uint64_t step) const;
  Streams cam(const Streams& x, const Streams& z, std::size_t layer, bool training,
              std::uint64_t step) const;

  std::vector<std::pair<std::string, Tensor>>& parameters() { return params_; }
  const std::vector<std::pair<std::string, Tensor>>& parameters() const { return params_; }

 private:
  struct LayerNormParams {
    Tensor gain, bias;
  };
  struct ModalityNorms {
    LayerNormParams metric, log, trace;
  };
  struct FfnParams {
    Tensor w1, b1, w2, b2;
  };
  struct SamParams {
    Tensor w_fuse;  // 2d x d
    GraphMultiHeadParams node_attn;
    GraphMultiHeadParams edge_attn;
    Tensor head_metric, head_log, head_trace;  // d x d
  };
  struct TamParams {
    AttentionParams metric, log, trace;
  };
  struct EncoderLayer {
    SamParams sam;
    TamParams tam;
    FfnParams ffn;
    ModalityNorms norm_sam, norm_tam, norm_ffn;
  };
  struct DecoderLayer {
    SamParams sam;
    TamParams tam;
    TamParams cam;  // cross attention reuses the per-modality param shape
    FfnParams ffn;
    ModalityNorms norm_sam, norm_tam, norm_cam, norm_ffn;
  };

  Tensor param(const std::string& name, std::vector<std::size_t> shape, double init_scale);
  Tensor const_param(const std::string& name, std::vector<std::size_t> shape, double value);
  AttentionParams make_attention(const std::string& prefix);
  GraphMultiHeadParams make_graph_attention(const std::string& prefix, std::size_t fe);
  LayerNormParams make_norm(const std::string& prefix);
  ModalityNorms make_modality_norms(const std::string& prefix);
  FfnParams make_ffn(const std::string& prefix);
  SamParams make_sam(const std::string& prefix);
  TamParams make_tam(const std::string& prefix);

  Streams norm_residual(const Streams& x, const Streams& delta, const ModalityNorms& n,
                        bool training, std::uint64_t step) const;
  Streams ffn_apply(const Streams& x, const FfnParams& f) const;
  const SamParams& sam_params(bool decoder, std::size_t layer) const;
  Tensor node_trace_aggregate(const Tensor& trace_stream) const;
  Tensor scatter_to_edges(const Tensor& node_stream) const;

  mutable std::uint64_t dropout_site_ = 0;  // advanced per dropout call within a step

  ModelConfig cfg_;
  GraphTopology topo_;
  Tensor agg_matrix_;      // N x Ne: per-node in+out edge aggregation
  Tensor scatter_matrix_;  // Ne x N: endpoint mean broadcast back to edges
  Tensor edge_onehot_;     // (N*N) x Ne: densify edge rows
  Tensor positional_nodes_;  // (k*N) x d
  Tensor positional_edges_;  // (k*Ne) x d
  Tensor causal_nodes_;      // k x k additive mask

  Tensor embed_metric_, embed_log_, embed_trace_;
  std::vector<EncoderLayer> encoder_;
  std::vector<DecoderLayer> decoder_;
  Tensor out_metric_, out_log_, out_trace_;
  Tensor trace_residual_proj_;  // (N*F_s) x F_s
  Tensor mlp_w1_, mlp_b1_, mlp_w2_, mlp_b2_;

  std::vector<std::pair<std::string, Tensor>> params_;

  std::vector<std::size_t> time_major_from_node_major_;
};

Tensor sinusoidal_positional_encoding(std::size_t k, std::size_t d);

}  // namespace mstgad
