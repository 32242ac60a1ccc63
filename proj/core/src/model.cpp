#include "nfcast/model.hpp"

#include <algorithm>
#include <cmath>

#include "nfcast/error.hpp"

namespace nfcast {

ForecastExample make_example(std::shared_ptr<const Window> current_window, std::shared_ptr<const WindowGraph> current,
                             std::shared_ptr<const WindowGraph> next) {
  if (current->n_conn() != next->n_conn()) {
    throw Error(ErrorKind::ShapeMismatch, "forecast pair windows differ in length");
  }
  ForecastExample ex;
  ex.targets = structural_targets(*next);
  ex.next_features = next->conn_features;
  ex.current_window = std::move(current_window);
  ex.pair = {std::move(current), std::move(next)};
  return ex;
}

std::string_view to_string(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::Gnn: return "gnn";
    case ModelKind::DLinear: return "dlinear";
    case ModelKind::Lstm: return "lstm";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "gnn") return ModelKind::Gnn;
  if (text == "dlinear") return ModelKind::DLinear;
  if (text == "lstm") return ModelKind::Lstm;
  throw Error(ErrorKind::InvalidArgument, "unknown model '" + std::string(text) + "' (gnn, dlinear, lstm)");
}

namespace detail {

void softmax_argmax(const ad::Tensor& logits, Matrix& probabilities, std::vector<std::uint32_t>& argmax) {
  const std::size_t r = logits.rows(), c = logits.cols();
  probabilities = Matrix(r, c);
  argmax.assign(r, 0);
  const auto x = logits.values();
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = x.data() + i * c;
    const auto best = std::max_element(row, row + c);
    argmax[i] = static_cast<std::uint32_t>(best - row);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - *best);
    for (std::size_t j = 0; j < c; ++j) probabilities(i, j) = std::exp(row[j] - *best) / z;
  }
}

std::vector<std::uint32_t> sample_mask(std::size_t n, double ratio, Rng& rng) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw Error(ErrorKind::InvalidArgument, "mask ratio outside [0,1]");
  auto k = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-9));
  k = std::min(k, n);
  std::vector<std::uint32_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_int(n - i));
    std::swap(order[i], order[j]);
  }
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace detail
}  // namespace nfcast
