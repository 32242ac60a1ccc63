#include "nfcast/baseline.hpp"

#include "nfcast/error.hpp"

namespace nfcast {

using ad::Shape;
using ad::Tensor;

void BaselineHyper::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidArgument, "baseline hyperparameters: " + what); };
  if (octet_dim == 0 || category_dim == 0 || hidden_dim == 0) fail("dimensions must be positive");
  if (kernel == 0 || kernel % 2 == 0) fail("kernel must be odd");
  if (!(mask_ratio >= 0.0 && mask_ratio <= 1.0)) fail("mask_ratio outside [0,1]");
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail("alpha outside [0,1]");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) fail("dropout_p outside [0,1)");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
}

BaselineModel::BaselineModel(BaselineDims dims, BaselineHyper hyper, std::uint64_t seed) : dims_(dims), hyper_(hyper) {
  hyper_.validate();
  if (dims_.n_features == 0 || dims_.seq_len == 0 || dims_.n_ip_classes == 0) {
    throw Error(ErrorKind::InvalidArgument, "baseline dimensions");
  }
  if (hyper_.backbone == BackboneKind::DLinear && hyper_.kernel > dims_.seq_len) {
    throw Error(ErrorKind::KernelTooLarge, "kernel " + std::to_string(hyper_.kernel) + " exceeds sequence length " +
                                               std::to_string(dims_.seq_len));
  }
  Rng rng(seed);
  octet_table_ = store_.add("embed.octet", Shape::mat(257, hyper_.octet_dim), nn::Init::Normal002, rng);
  octet_offsets_ = store_.add("embed.octet_slot", Shape::mat(8, hyper_.octet_dim), nn::Init::Normal002, rng);
  category_table_ = store_.add("embed.port_category", Shape::mat(kPortNodes + 1, hyper_.category_dim),
                               nn::Init::Normal002, rng);
  numeric_mask_ = store_.add("embed.numeric_mask", Shape::vec(dims_.n_features), nn::Init::Normal002, rng);

  const std::size_t width = token_width();
  const std::size_t h = hyper_.hidden_dim;
  if (hyper_.backbone == BackboneKind::DLinear) {
    trend_ = nn::make_linear(store_, "dlinear.trend", dims_.seq_len, dims_.seq_len, rng);
    remainder_ = nn::make_linear(store_, "dlinear.remainder", dims_.seq_len, dims_.seq_len, rng);
    projection_ = nn::make_linear(store_, "dlinear.projection", width, h, rng);
  } else {
    lstm_input_ = store_.add("lstm.input.weight", Shape::mat(width, 4 * h), nn::Init::XavierUniform, rng);
    lstm_recurrent_ = store_.add("lstm.recurrent.weight", Shape::mat(h, 4 * h), nn::Init::XavierUniform, rng);
    lstm_bias_ = store_.add("lstm.bias", Shape::vec(4 * h), nn::Init::Zeros, rng);
  }
  const std::size_t n_logits = 2 * dims_.n_ip_classes + 2 * kPortNodes;
  struct_hidden_ = nn::make_linear(store_, "head.structure.hidden", h, h, rng);
  struct_out_ = nn::make_linear(store_, "head.structure.out", h, n_logits, rng);
  numeric_hidden_ = nn::make_linear(store_, "head.numeric.hidden", h, h, rng);
  numeric_out_ = nn::make_linear(store_, "head.numeric.out", h, dims_.n_features, rng);
}

std::size_t BaselineModel::token_width() const noexcept {
  return 8 * hyper_.octet_dim + 2 * hyper_.category_dim + kProtocolCategories + dims_.n_features;
}

std::pair<Tensor, std::vector<std::uint32_t>> BaselineModel::embed_sequence(const Window& window, Rng& rng,
                                                                            double mask_ratio) const {
  auto mask = detail::sample_mask(window.records.size(), mask_ratio, rng);
  Tensor tokens = embed_sequence(window, mask);
  return {std::move(tokens), std::move(mask)};
}

Tensor BaselineModel::embed_sequence(const Window& window, std::span<const std::uint32_t> mask) const {
  const std::size_t n = window.records.size();
  const std::size_t f = dims_.n_features;
  if (n == 0) throw Error(ErrorKind::ShapeMismatch, "empty window");
  std::vector<bool> masked(n, false);
  for (auto m : mask) {
    if (m >= n) throw Error(ErrorKind::IndexOutOfBounds, "mask row " + std::to_string(m));
    masked[m] = true;
  }

  std::vector<std::uint32_t> octets(8 * n), slots(8 * n), categories(2 * n), numeric_rows(n);
  std::vector<double> protocol(n * kProtocolCategories, 0.0), numerics(n * f);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = window.records[i];
    if (r.numerics.size() != f) throw Error(ErrorKind::ShapeMismatch, "flow numeric width");
    for (std::size_t s = 0; s < 8; ++s) {
      const std::uint8_t octet = s < 4 ? r.src_ip[s] : r.dst_ip[s - 4];
      octets[8 * i + s] = masked[i] ? kOctetMaskRow : octet;
      slots[8 * i + s] = static_cast<std::uint32_t>(s);
    }
    categories[2 * i] = masked[i] ? kCategoryMaskRow : static_cast<std::uint32_t>(port_category(r.src_port));
    categories[2 * i + 1] = masked[i] ? kCategoryMaskRow : static_cast<std::uint32_t>(port_category(r.dst_port));
    if (!masked[i]) protocol[i * kProtocolCategories + encode_protocol(r.protocol).index()] = 1.0;
    const auto normalized = l2_normalize(r.numerics);
    std::copy(normalized.begin(), normalized.end(), numerics.begin() + static_cast<std::ptrdiff_t>(i * f));
    numeric_rows[i] = masked[i] ? static_cast<std::uint32_t>(n) : static_cast<std::uint32_t>(i);
  }

  const Tensor oct = ad::reshape(
      ad::add(ad::row_gather(octet_table_, octets), ad::row_gather(octet_offsets_, slots)),
      Shape::mat(n, 8 * hyper_.octet_dim));
  const Tensor cat = ad::reshape(ad::row_gather(category_table_, categories), Shape::mat(n, 2 * hyper_.category_dim));
  const Tensor proto = Tensor::from(Shape::mat(n, kProtocolCategories), std::move(protocol));
  Tensor num = Tensor::from(Shape::mat(n, f), std::move(numerics));
  if (!mask.empty()) {
    num = ad::row_gather(ad::concat({num, ad::reshape(numeric_mask_, Shape::mat(1, f))}, 0), numeric_rows);
  }
  return ad::concat({oct, cat, proto, num}, 1);
}

std::pair<Tensor, Tensor> BaselineModel::decompose(const Tensor& seq) const {
  Tensor trend = ad::moving_average(seq, hyper_.kernel);
  Tensor remainder = ad::sub(seq, trend);
  return {std::move(trend), std::move(remainder)};
}

Tensor BaselineModel::dlinear_forward(const Tensor& seq) const {
  if (hyper_.backbone != BackboneKind::DLinear) throw Error(ErrorKind::InvalidArgument, "model has no DLinear backbone");
  if (seq.rows() != dims_.seq_len) {
    throw Error(ErrorKind::ShapeMismatch, "DLinear expects " + std::to_string(dims_.seq_len) + " steps, got " +
                                              std::to_string(seq.rows()));
  }
  if (hyper_.kernel > seq.rows()) throw Error(ErrorKind::KernelTooLarge, "kernel exceeds sequence length");
  const auto [trend, remainder] = decompose(seq);
  // Time-axis maps act on the transposed sequence so each channel shares them.
  const Tensor mixed = ad::add(trend_(ad::transpose(trend)), remainder_(ad::transpose(remainder)));
  return projection_(ad::transpose(mixed));
}

Tensor BaselineModel::lstm_forward(const Tensor& seq) const {
  if (hyper_.backbone != BackboneKind::Lstm) throw Error(ErrorKind::InvalidArgument, "model has no LSTM backbone");
  const std::size_t h = hyper_.hidden_dim;
  const Tensor projected = ad::add(ad::matmul(seq, lstm_input_), lstm_bias_);
  Tensor hidden = Tensor::zeros(Shape::mat(1, h));
  Tensor cell = Tensor::zeros(Shape::mat(1, h));
  std::vector<Tensor> states;
  states.reserve(seq.rows());
  for (std::size_t t = 0; t < seq.rows(); ++t) {
    const std::uint32_t row[] = {static_cast<std::uint32_t>(t)};
    const Tensor gates = ad::add(ad::row_gather(projected, row), ad::matmul(hidden, lstm_recurrent_));
    const Tensor input_gate = ad::sigmoid(ad::slice_cols(gates, 0, h));
    const Tensor forget_gate = ad::sigmoid(ad::slice_cols(gates, h, h));
    const Tensor candidate = ad::tanh(ad::slice_cols(gates, 2 * h, h));
    const Tensor output_gate = ad::sigmoid(ad::slice_cols(gates, 3 * h, h));
    cell = ad::add(ad::mul(forget_gate, cell), ad::mul(input_gate, candidate));
    hidden = ad::mul(output_gate, ad::tanh(cell));
    states.push_back(hidden);
  }
  return ad::concat(states, 0);
}

Tensor BaselineModel::backbone_forward(const Tensor& seq, bool training, Rng* rng) const {
  Tensor out = hyper_.backbone == BackboneKind::DLinear ? dlinear_forward(seq) : lstm_forward(seq);
  if (training && rng && hyper_.dropout_p > 0.0) out = ad::dropout(out, hyper_.dropout_p, *rng);
  return out;
}

HeadOutputs BaselineModel::decode_heads(const Tensor& hidden) const {
  const Tensor logits = struct_out_(ad::relu(struct_hidden_(hidden)));
  const std::size_t v = dims_.n_ip_classes;
  HeadOutputs out;
  out.logits[0] = ad::slice_cols(logits, 0, v);
  out.logits[1] = ad::slice_cols(logits, v, v);
  out.logits[2] = ad::slice_cols(logits, 2 * v, kPortNodes);
  out.logits[3] = ad::slice_cols(logits, 2 * v + kPortNodes, kPortNodes);
  out.numerics = numeric_out_(ad::relu(numeric_hidden_(hidden)));
  return out;
}

Tensor baseline_loss(const HeadOutputs& outputs, const StructuralTargets& targets, const Matrix& next_numerics,
                     std::span<const std::uint32_t> mask, double alpha) {
  if (mask.empty()) throw Error(ErrorKind::EmptyMask, "numeric loss needs at least one masked position");
  Tensor structural;
  for (std::size_t r = 0; r < kRelations; ++r) {
    for (auto c : targets.classes[r]) {
      if (c >= outputs.logits[r].cols()) throw Error(ErrorKind::ClassOutOfRange, "target class " + std::to_string(c));
    }
    const Tensor ce = ad::softmax_cross_entropy(outputs.logits[r], targets.classes[r]);
    structural = structural.defined() ? ad::add(structural, ce) : ce;
  }
  structural = ad::scale(structural, 1.0 / static_cast<double>(kRelations));

  if (outputs.numerics.rows() != next_numerics.rows || outputs.numerics.cols() != next_numerics.cols) {
    throw Error(ErrorKind::ShapeMismatch, "numeric head vs next-window numerics");
  }
  std::vector<double> target;
  for (auto r : mask) {
    const auto row = next_numerics.row(r);
    target.insert(target.end(), row.begin(), row.end());
  }
  const Tensor numeric = ad::mse_loss(ad::row_gather(outputs.numerics, mask),
                                      Tensor::from(Shape::mat(mask.size(), next_numerics.cols), std::move(target)));
  return ad::add(ad::scale(structural, alpha), ad::scale(numeric, 1.0 - alpha));
}

namespace {
Matrix numeric_columns(const Matrix& features, std::size_t f) {
  Matrix out(features.rows, f);
  for (std::size_t i = 0; i < features.rows; ++i)
    for (std::size_t j = 0; j < f; ++j) out(i, j) = features(i, j);
  return out;
}
}  // namespace

Tensor BaselineModel::training_loss(const ForecastExample& example, Rng& rng) const {
  const auto [tokens, mask] = embed_sequence(*example.current_window, rng, hyper_.mask_ratio);
  const HeadOutputs out = decode_heads(backbone_forward(tokens, true, &rng));
  return baseline_loss(out, example.targets, numeric_columns(example.next_features, dims_.n_features), mask,
                       hyper_.alpha);
}

Forecast BaselineModel::forecast(const ForecastExample& example) const {
  const Tensor tokens = embed_sequence(*example.current_window, {});
  const HeadOutputs heads = decode_heads(backbone_forward(tokens, false, nullptr));
  Forecast out;
  out.features = heads.numerics.to_matrix();
  for (std::size_t r = 0; r < kRelations; ++r) detail::softmax_argmax(heads.logits[r], out.probabilities[r], out.attachments[r]);
  return out;
}

}  // namespace nfcast
