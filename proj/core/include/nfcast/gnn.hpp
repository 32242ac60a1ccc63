#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

#include "nfcast/model.hpp"

namespace nfcast {

struct GnnHyper {
  std::size_t hidden_dim = 32;
  std::size_t latent_dim = 16;
  std::size_t n_layers = 2;
  double mask_ratio = 0.5;
  double edge_drop_p = 0.1;
  double alpha = 0.5;
  double dropout_p = 0.0;
  double learning_rate = 1e-3;

  void validate() const;
};

struct GnnDims {
  std::size_t conn_width = 9;  // F + 4
  std::size_t d_place = 8;
  std::size_t n_ip_classes = 1;  // vocabulary size including OOV
};

/// Replaces ceil(ratio * L) connection rows with the token; IP/port features
/// and edges are untouched. Returns the masked graph and the sorted masked rows.
std::pair<WindowGraph, std::vector<std::uint32_t>> apply_mask(const WindowGraph& g, double ratio,
                                                              std::span<const double> token, Rng& rng);

/// Drops each typed edge independently with probability p. The reverse copy
/// is implicit, so it disappears together with the forward edge.
WindowGraph drop_edges(const WindowGraph& g, double p, Rng& rng);

/// Mean over the four relations of row-wise softmax cross-entropy.
/// Throws Error(ClassOutOfRange) for a target outside its score row.
ad::Tensor struct_loss(const std::array<ad::Tensor, kRelations>& scores, const StructuralTargets& targets);
/// MSE over the masked rows only. Throws Error(EmptyMask) for an empty mask.
ad::Tensor feat_loss(const ad::Tensor& pred, const Matrix& next_features, std::span<const std::uint32_t> mask);
/// alpha * structural + (1 - alpha) * feature.
ad::Tensor total_loss(const ad::Tensor& structural, const ad::Tensor& feature, double alpha);

/// Heterogeneous GraphSAGE masked autoencoder that maps the current window
/// graph onto the next window's connection features and attachments.
///
/// Per layer and node type:
///   h' = relu(h W_self + b + sum_rel mean_{u in N_rel(v)} h_u W_rel)
/// over eight directed relations (each typed connection edge in both
/// directions). IP candidates cover the whole vocabulary: vocabulary ids not
/// present in the window share the embedding of an isolated IP node.
class GnnModel final : public ForecastModel {
 public:
  struct Embeddings {
    ad::Tensor ip;    // (n_ip + 1) x latent; last row is the isolated node
    ad::Tensor port;  // 8 x latent
    ad::Tensor conn;  // L x latent
  };

  GnnModel(GnnDims dims, GnnHyper hyper, std::uint64_t seed);

  ModelKind kind() const noexcept override { return ModelKind::Gnn; }
  nn::ParameterStore& parameters() noexcept override { return store_; }
  const nn::ParameterStore& parameters() const noexcept override { return store_; }
  double learning_rate() const noexcept override { return hyper_.learning_rate; }
  std::size_t numeric_width() const noexcept override { return dims_.conn_width - kProtocolCategories; }

  const GnnHyper& hyper() const noexcept { return hyper_; }
  const GnnDims& dims() const noexcept { return dims_; }
  const ad::Tensor& mask_token() const noexcept { return mask_token_; }
  const std::array<ad::Tensor, kRelations>& relation_weights() const noexcept { return w_rel_; }

  /// Encodes with explicit connection inputs (masked or not). rng is used for
  /// dropout only when training is true.
  Embeddings encode(const WindowGraph& g, const ad::Tensor& conn_input, bool training, Rng* rng) const;
  Embeddings encode(const WindowGraph& g) const;
  ad::Tensor decode_features(const ad::Tensor& conn_embeddings) const;
  /// IP relations score against every vocabulary id, port relations against the 8 port nodes.
  std::array<ad::Tensor, kRelations> decode_structure(const WindowGraph& g, const Embeddings& emb) const;
  /// Connection inputs with masked rows taken from the learnable token.
  ad::Tensor masked_connection_input(const WindowGraph& g, std::span<const std::uint32_t> mask) const;

  ad::Tensor training_loss(const ForecastExample& example, Rng& rng) const override;
  Forecast forecast(const ForecastExample& example) const override;
  Forecast forecast(const WindowGraph& g) const;

 private:
  struct Layer {
    std::array<nn::Linear, 3> self;  // ip, port, conn
    // conn<-src_ip, conn<-dst_ip, conn<-src_port, conn<-dst_port,
    // ip<-conn(src), ip<-conn(dst), port<-conn(src), port<-conn(dst)
    std::array<ad::Tensor, 8> rel;
  };

  std::vector<std::uint32_t> candidate_rows(const WindowGraph& g) const;

  GnnDims dims_;
  GnnHyper hyper_;
  nn::ParameterStore store_;
  std::array<nn::Linear, 3> input_;  // ip, port, conn
  ad::Tensor mask_token_;
  std::vector<Layer> layers_;
  nn::Linear dec_hidden_;
  nn::Linear dec_out_;
  std::array<ad::Tensor, kRelations> w_rel_;
};

/// Score of one enhanced dot product: sum_k w[k] * u[k] * v[k].
double enhanced_dot(std::span<const double> u, std::span<const double> v, std::span<const double> w);

}  // namespace nfcast
