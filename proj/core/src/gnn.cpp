#include "nfcast/gnn.hpp"

#include <cmath>
#include <optional>

#include "nfcast/error.hpp"

namespace nfcast {

using ad::Shape;
using ad::Tensor;

void GnnHyper::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidArgument, "gnn hyperparameters: " + what); };
  if (hidden_dim == 0 || latent_dim == 0 || n_layers == 0) fail("dimensions must be positive");
  if (!(mask_ratio >= 0.0 && mask_ratio <= 1.0)) fail("mask_ratio outside [0,1]");
  if (!(edge_drop_p >= 0.0 && edge_drop_p < 1.0)) fail("edge_drop_p outside [0,1)");
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail("alpha outside [0,1]");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) fail("dropout_p outside [0,1)");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
}

std::pair<WindowGraph, std::vector<std::uint32_t>> apply_mask(const WindowGraph& g, double ratio,
                                                              std::span<const double> token, Rng& rng) {
  if (token.size() != g.conn_features.cols) {
    throw Error(ErrorKind::ShapeMismatch, "mask token width " + std::to_string(token.size()) + " vs " +
                                              std::to_string(g.conn_features.cols));
  }
  auto mask = detail::sample_mask(g.n_conn(), ratio, rng);
  WindowGraph out = g;
  for (auto row : mask) std::copy(token.begin(), token.end(), out.conn_features.row(row).begin());
  return {std::move(out), std::move(mask)};
}

WindowGraph drop_edges(const WindowGraph& g, double p, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw Error(ErrorKind::InvalidArgument, "edge drop probability outside [0,1)");
  if (p == 0.0) return g;
  WindowGraph out = g;
  for (auto& e : out.edges) {
    EdgeList kept;
    for (std::size_t k = 0; k < e.size(); ++k) {
      if (rng.bernoulli(p)) continue;
      kept.conn.push_back(e.conn[k]);
      kept.target.push_back(e.target[k]);
    }
    e = std::move(kept);
  }
  return out;
}

Tensor struct_loss(const std::array<Tensor, kRelations>& scores, const StructuralTargets& targets) {
  Tensor total;
  for (auto rel : kAllRelations) {
    const auto& s = scores[index(rel)];
    const auto& t = targets.classes[index(rel)];
    for (auto c : t) {
      if (c >= s.cols()) {
        throw Error(ErrorKind::ClassOutOfRange,
                    "target class " + std::to_string(c) + " with " + std::to_string(s.cols()) + " candidates");
      }
    }
    Tensor ce = ad::softmax_cross_entropy(s, t);
    total = total.defined() ? ad::add(total, ce) : ce;
  }
  return ad::scale(total, 1.0 / static_cast<double>(kRelations));
}

Tensor feat_loss(const Tensor& pred, const Matrix& next_features, std::span<const std::uint32_t> mask) {
  if (mask.empty()) throw Error(ErrorKind::EmptyMask, "feature loss needs at least one masked row");
  if (pred.rows() != next_features.rows || pred.cols() != next_features.cols) {
    throw Error(ErrorKind::ShapeMismatch, "prediction vs next-window features");
  }
  std::vector<double> target;
  target.reserve(mask.size() * next_features.cols);
  for (auto r : mask) {
    const auto row = next_features.row(r);
    target.insert(target.end(), row.begin(), row.end());
  }
  return ad::mse_loss(ad::row_gather(pred, mask),
                      Tensor::from(Shape::mat(mask.size(), next_features.cols), std::move(target)));
}

Tensor total_loss(const Tensor& structural, const Tensor& feature, double alpha) {
  return ad::add(ad::scale(structural, alpha), ad::scale(feature, 1.0 - alpha));
}

double enhanced_dot(std::span<const double> u, std::span<const double> v, std::span<const double> w) {
  double s = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) s += w[k] * u[k] * v[k];
  return s;
}

GnnModel::GnnModel(GnnDims dims, GnnHyper hyper, std::uint64_t seed) : dims_(dims), hyper_(hyper) {
  hyper_.validate();
  if (dims_.conn_width <= kProtocolCategories || dims_.d_place == 0 || dims_.n_ip_classes == 0) {
    throw Error(ErrorKind::InvalidArgument, "gnn dimensions");
  }
  Rng rng(seed);
  const std::size_t h = hyper_.hidden_dim;
  input_[0] = nn::make_linear(store_, "input.ip", dims_.d_place, h, rng);
  input_[1] = nn::make_linear(store_, "input.port", dims_.d_place, h, rng);
  input_[2] = nn::make_linear(store_, "input.conn", dims_.conn_width, h, rng);
  mask_token_ = store_.add("mask_token", Shape::vec(dims_.conn_width), nn::Init::Normal002, rng);

  static constexpr std::array<const char*, 3> kTypes{"ip", "port", "conn"};
  static constexpr std::array<const char*, 8> kRels{"conn_from_src_ip", "conn_from_dst_ip", "conn_from_src_port",
                                                    "conn_from_dst_port", "ip_from_conn_src", "ip_from_conn_dst",
                                                    "port_from_conn_src", "port_from_conn_dst"};
  for (std::size_t l = 0; l < hyper_.n_layers; ++l) {
    const std::size_t out = l + 1 == hyper_.n_layers ? hyper_.latent_dim : h;
    const std::string prefix = "sage" + std::to_string(l) + ".";
    Layer layer;
    for (std::size_t t = 0; t < 3; ++t) layer.self[t] = nn::make_linear(store_, prefix + kTypes[t] + ".self", h, out, rng);
    for (std::size_t r = 0; r < 8; ++r) {
      layer.rel[r] = store_.add(prefix + kRels[r] + ".weight", Shape::mat(h, out), nn::Init::XavierUniform, rng);
    }
    layers_.push_back(std::move(layer));
  }
  dec_hidden_ = nn::make_linear(store_, "feature_decoder.hidden", hyper_.latent_dim, h, rng);
  dec_out_ = nn::make_linear(store_, "feature_decoder.out", h, dims_.conn_width, rng);
  static constexpr std::array<const char*, kRelations> kStruct{"src_ip", "dst_ip", "src_port", "dst_port"};
  for (std::size_t r = 0; r < kRelations; ++r) {
    w_rel_[r] = store_.add(std::string("struct_decoder.") + kStruct[r], Shape::vec(hyper_.latent_dim), nn::Init::Ones, rng);
  }
}

Tensor GnnModel::masked_connection_input(const WindowGraph& g, std::span<const std::uint32_t> mask) const {
  const Tensor feats = Tensor::from_matrix(g.conn_features);
  if (mask.empty()) return feats;
  const std::size_t n = g.n_conn();
  std::vector<std::uint32_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = static_cast<std::uint32_t>(i);
  for (auto m : mask) {
    if (m >= n) throw Error(ErrorKind::IndexOutOfBounds, "mask row " + std::to_string(m));
    rows[m] = static_cast<std::uint32_t>(n);
  }
  // Row n of the stack is the token; masked positions gather it.
  const Tensor stacked = ad::concat({feats, ad::reshape(mask_token_, Shape::mat(1, dims_.conn_width))}, 0);
  return ad::row_gather(stacked, rows);
}

GnnModel::Embeddings GnnModel::encode(const WindowGraph& g, const Tensor& conn_input, bool training, Rng* rng) const {
  const std::size_t n_conn = g.n_conn();
  const std::size_t n_ip = g.n_ip() + 1;
  if (conn_input.rows() != n_conn || conn_input.cols() != dims_.conn_width) {
    throw Error(ErrorKind::ShapeMismatch, "connection input " + conn_input.shape().str());
  }
  if (g.d_place() != dims_.d_place || g.ip_features.cols != dims_.d_place) {
    throw Error(ErrorKind::ShapeMismatch, "placeholder width " + std::to_string(g.d_place()));
  }
  const Tensor ip_in = ad::concat(
      {Tensor::from_matrix(g.ip_features), Tensor::full(Shape::mat(1, dims_.d_place), 1.0)}, 0);
  Tensor h_ip = input_[0](ip_in);
  Tensor h_port = input_[1](Tensor::from_matrix(g.port_features));
  Tensor h_conn = input_[2](conn_input);

  const auto& e_sip = g.relation(Relation::SrcIp);
  const auto& e_dip = g.relation(Relation::DstIp);
  const auto& e_sport = g.relation(Relation::SrcPort);
  const auto& e_dport = g.relation(Relation::DstPort);

  // mean_{src -> dst}(h_src) W; nothing when the relation has no edges, which
  // leaves a zero aggregate for every destination node.
  auto aggregate = [](Tensor& acc, const Tensor& h_src, std::span<const std::uint32_t> src,
                      std::span<const std::uint32_t> dst, std::size_t n_dst, const Tensor& w) {
    if (src.empty()) return;
    acc = ad::add(acc, ad::matmul(ad::segment_mean(ad::row_gather(h_src, src), dst, n_dst), w));
  };

  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    Tensor conn = layer.self[2](h_conn);
    aggregate(conn, h_ip, e_sip.target, e_sip.conn, n_conn, layer.rel[0]);
    aggregate(conn, h_ip, e_dip.target, e_dip.conn, n_conn, layer.rel[1]);
    aggregate(conn, h_port, e_sport.target, e_sport.conn, n_conn, layer.rel[2]);
    aggregate(conn, h_port, e_dport.target, e_dport.conn, n_conn, layer.rel[3]);
    Tensor ip = layer.self[0](h_ip);
    aggregate(ip, h_conn, e_sip.conn, e_sip.target, n_ip, layer.rel[4]);
    aggregate(ip, h_conn, e_dip.conn, e_dip.target, n_ip, layer.rel[5]);
    Tensor port = layer.self[1](h_port);
    aggregate(port, h_conn, e_sport.conn, e_sport.target, kPortNodes, layer.rel[6]);
    aggregate(port, h_conn, e_dport.conn, e_dport.target, kPortNodes, layer.rel[7]);

    h_conn = ad::relu(conn);
    h_ip = ad::relu(ip);
    h_port = ad::relu(port);
    if (training && rng && hyper_.dropout_p > 0.0 && l + 1 < layers_.size()) {
      h_conn = ad::dropout(h_conn, hyper_.dropout_p, *rng);
      h_ip = ad::dropout(h_ip, hyper_.dropout_p, *rng);
      h_port = ad::dropout(h_port, hyper_.dropout_p, *rng);
    }
  }
  return {h_ip, h_port, h_conn};
}

GnnModel::Embeddings GnnModel::encode(const WindowGraph& g) const {
  return encode(g, Tensor::from_matrix(g.conn_features), false, nullptr);
}

Tensor GnnModel::decode_features(const Tensor& conn_embeddings) const {
  return dec_out_(ad::relu(dec_hidden_(conn_embeddings)));
}

std::vector<std::uint32_t> GnnModel::candidate_rows(const WindowGraph& g) const {
  const auto isolated = static_cast<std::uint32_t>(g.n_ip());
  std::vector<std::uint32_t> rows(dims_.n_ip_classes, isolated);
  for (std::size_t k = 0; k < g.n_ip(); ++k) {
    const auto id = g.ip_ids[k];
    if (id >= dims_.n_ip_classes) {
      throw Error(ErrorKind::ClassOutOfRange, "IP id " + std::to_string(id) + " beyond vocabulary of " +
                                                  std::to_string(dims_.n_ip_classes));
    }
    rows[id] = static_cast<std::uint32_t>(k);
  }
  return rows;
}

std::array<Tensor, kRelations> GnnModel::decode_structure(const WindowGraph& g, const Embeddings& emb) const {
  const auto rows = candidate_rows(g);
  const Tensor ip_candidates = ad::transpose(ad::row_gather(emb.ip, rows));
  const Tensor port_candidates = ad::transpose(emb.port);
  std::array<Tensor, kRelations> scores;
  for (auto rel : kAllRelations) {
    const std::size_t r = index(rel);
    scores[r] = ad::matmul(ad::mul(emb.conn, w_rel_[r]), targets_ip(rel) ? ip_candidates : port_candidates);
  }
  return scores;
}

Tensor GnnModel::training_loss(const ForecastExample& example, Rng& rng) const {
  const WindowGraph& current = *example.pair.current;
  const WindowGraph dropped = drop_edges(current, hyper_.edge_drop_p, rng);
  const auto mask = detail::sample_mask(current.n_conn(), hyper_.mask_ratio, rng);
  const Embeddings emb = encode(dropped, masked_connection_input(current, mask), true, &rng);
  const Tensor structural = struct_loss(decode_structure(dropped, emb), example.targets);
  const Tensor feature = feat_loss(decode_features(emb.conn), example.next_features, mask);
  return total_loss(structural, feature, hyper_.alpha);
}

Forecast GnnModel::forecast(const WindowGraph& g) const {
  const Embeddings emb = encode(g);
  Forecast out;
  out.features = decode_features(emb.conn).to_matrix();
  const auto scores = decode_structure(g, emb);
  for (std::size_t r = 0; r < kRelations; ++r) detail::softmax_argmax(scores[r], out.probabilities[r], out.attachments[r]);
  return out;
}

Forecast GnnModel::forecast(const ForecastExample& example) const { return forecast(*example.pair.current); }

}  // namespace nfcast
