#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

#include "nfcast/model.hpp"

namespace nfcast {

enum class BackboneKind { DLinear, Lstm };

struct BaselineHyper {
  BackboneKind backbone = BackboneKind::DLinear;
  std::size_t octet_dim = 4;
  std::size_t category_dim = 4;
  std::size_t hidden_dim = 32;  // backbone output width and head hidden width
  std::size_t kernel = 25;      // DLinear moving-average kernel, odd
  double mask_ratio = 0.5;
  double alpha = 0.5;
  double dropout_p = 0.0;
  double learning_rate = 1e-3;

  void validate() const;
};

struct BaselineDims {
  std::size_t n_features = 5;  // F
  std::size_t seq_len = 512;   // L
  std::size_t n_ip_classes = 1;
};

struct HeadOutputs {
  std::array<ad::Tensor, kRelations> logits;  // L x |V|, L x |V|, L x 8, L x 8
  ad::Tensor numerics;                        // L x F
};

/// Unified masked-autoencoder baseline: a shared token embedder, a swappable
/// sequence backbone and a two-head MLP decoder.
///
/// Token per flow: 8 octet embeddings (one shared 257-row table, row 256 is
/// the mask, plus a learned offset per octet slot), src/dst port-category
/// embeddings (row 8 is the mask), protocol one-hot (zeroed when masked) and
/// the L2-normalized numerics (replaced by a learned vector when masked).
class BaselineModel final : public ForecastModel {
 public:
  static constexpr std::uint32_t kOctetMaskRow = 256;
  static constexpr std::uint32_t kCategoryMaskRow = kPortNodes;

  BaselineModel(BaselineDims dims, BaselineHyper hyper, std::uint64_t seed);

  ModelKind kind() const noexcept override {
    return hyper_.backbone == BackboneKind::DLinear ? ModelKind::DLinear : ModelKind::Lstm;
  }
  nn::ParameterStore& parameters() noexcept override { return store_; }
  const nn::ParameterStore& parameters() const noexcept override { return store_; }
  double learning_rate() const noexcept override { return hyper_.learning_rate; }
  std::size_t numeric_width() const noexcept override { return dims_.n_features; }

  const BaselineHyper& hyper() const noexcept { return hyper_; }
  const BaselineDims& dims() const noexcept { return dims_; }
  std::size_t token_width() const noexcept;

  /// Masked rows are drawn from rng; mask_ratio 0 masks nothing.
  std::pair<ad::Tensor, std::vector<std::uint32_t>> embed_sequence(const Window& window, Rng& rng,
                                                                   double mask_ratio) const;
  ad::Tensor embed_sequence(const Window& window, std::span<const std::uint32_t> mask) const;

  /// Trend/remainder decomposition, one time-axis linear map per component
  /// (shared across channels), then a projection to hidden_dim.
  ad::Tensor dlinear_forward(const ad::Tensor& seq) const;
  /// Moving-average trend and remainder, exposed for inspection.
  std::pair<ad::Tensor, ad::Tensor> decompose(const ad::Tensor& seq) const;
  /// Single-layer LSTM unrolled over the rows; returns per-step hidden states.
  ad::Tensor lstm_forward(const ad::Tensor& seq) const;
  ad::Tensor backbone_forward(const ad::Tensor& seq, bool training, Rng* rng) const;
  HeadOutputs decode_heads(const ad::Tensor& hidden) const;

  ad::Tensor training_loss(const ForecastExample& example, Rng& rng) const override;
  Forecast forecast(const ForecastExample& example) const override;

 private:
  BaselineDims dims_;
  BaselineHyper hyper_;
  nn::ParameterStore store_;
  ad::Tensor octet_table_;
  ad::Tensor octet_offsets_;
  ad::Tensor category_table_;
  ad::Tensor numeric_mask_;
  nn::Linear trend_;
  nn::Linear remainder_;
  nn::Linear projection_;
  ad::Tensor lstm_input_;
  ad::Tensor lstm_recurrent_;
  ad::Tensor lstm_bias_;
  nn::Linear struct_hidden_;
  nn::Linear struct_out_;
  nn::Linear numeric_hidden_;
  nn::Linear numeric_out_;
};

/// alpha * mean cross-entropy over the four structural heads (all positions)
/// + (1 - alpha) * MSE of the numerics on the masked positions.
/// Throws Error(EmptyMask) for an empty mask.
ad::Tensor baseline_loss(const HeadOutputs& outputs, const StructuralTargets& targets, const Matrix& next_numerics,
                         std::span<const std::uint32_t> mask, double alpha);

}  // namespace nfcast
