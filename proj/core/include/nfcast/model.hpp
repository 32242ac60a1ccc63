#pragma once

#include <array>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "nfcast/autodiff.hpp"
#include "nfcast/graph.hpp"
#include "nfcast/matrix.hpp"
#include "nfcast/nn.hpp"
#include "nfcast/preprocess.hpp"
#include "nfcast/rng.hpp"

namespace nfcast {

/// A forecasting sample: the current window (as graph and as raw flows) and
/// what the model must predict about the next window, aligned by position.
struct ForecastExample {
  ForecastPair pair;
  std::shared_ptr<const Window> current_window;
  StructuralTargets targets;
  Matrix next_features;  // L x (F + 4): numerics then protocol one-hot
};

ForecastExample make_example(std::shared_ptr<const Window> current_window,
                             std::shared_ptr<const WindowGraph> current,
                             std::shared_ptr<const WindowGraph> next);

struct Forecast {
  /// Predicted connection features; the first F columns are the numerics.
  Matrix features;
  std::array<Matrix, kRelations> probabilities;
  std::array<std::vector<std::uint32_t>, kRelations> attachments;
};

enum class ModelKind { Gnn, DLinear, Lstm };
std::string_view to_string(ModelKind kind) noexcept;
ModelKind parse_model_kind(std::string_view text);

class ForecastModel {
 public:
  virtual ~ForecastModel() = default;

  virtual ModelKind kind() const noexcept = 0;
  virtual nn::ParameterStore& parameters() noexcept = 0;
  virtual const nn::ParameterStore& parameters() const noexcept = 0;
  virtual double learning_rate() const noexcept = 0;
  /// Number of predicted numeric feature columns (F).
  virtual std::size_t numeric_width() const noexcept = 0;

  /// Training objective for one example, with all training-time corruption
  /// (masking, edge dropping, dropout) drawn from rng.
  virtual ad::Tensor training_loss(const ForecastExample& example, Rng& rng) const = 0;
  /// Inference without any corruption.
  virtual Forecast forecast(const ForecastExample& example) const = 0;
};

namespace detail {
/// Row-wise softmax and argmax (lowest index wins ties) of a logit matrix.
void softmax_argmax(const ad::Tensor& logits, Matrix& probabilities, std::vector<std::uint32_t>& argmax);
/// ceil(ratio * n) distinct positions drawn uniformly without replacement, sorted.
std::vector<std::uint32_t> sample_mask(std::size_t n, double ratio, Rng& rng);
}  // namespace detail

}  // namespace nfcast
