#include "nfcast/nn.hpp"

#include <cmath>
#include <fstream>

#include "nfcast/bytes.hpp"
#include "nfcast/error.hpp"

namespace nfcast::nn {

ad::Tensor ParameterStore::add(const std::string& name, ad::Shape shape, Init init, Rng& rng) {
  if (contains(name)) throw Error(ErrorKind::InvalidArgument, "parameter '" + name + "' registered twice");
  std::vector<double> values(shape.numel(), 0.0);
  switch (init) {
    case Init::Zeros: break;
    case Init::Ones: std::fill(values.begin(), values.end(), 1.0); break;
    case Init::Normal002:
      for (auto& v : values) v = rng.normal(0.0, 0.02);
      break;
    case Init::XavierUniform: {
      const double fan_in = shape.rank >= 2 ? static_cast<double>(shape[0]) : 1.0;
      const double fan_out = shape.rank >= 2 ? static_cast<double>(shape[1]) : static_cast<double>(shape.numel());
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      for (auto& v : values) v = rng.uniform(-bound, bound);
      break;
    }
  }
  entries_.push_back({name, ad::Tensor::from(shape, std::move(values), true)});
  return entries_.back().tensor;
}

const ad::Tensor& ParameterStore::get(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.tensor;
  throw Error(ErrorKind::InvalidArgument, "no parameter named '" + name + "'");
}

bool ParameterStore::contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

std::size_t ParameterStore::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

std::vector<std::vector<double>> ParameterStore::snapshot() const {
  std::vector<std::vector<double>> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.emplace_back(e.tensor.values().begin(), e.tensor.values().end());
  return out;
}

void ParameterStore::restore(const std::vector<std::vector<double>>& values) {
  if (values.size() != entries_.size()) throw Error(ErrorKind::ShapeMismatch, "snapshot parameter count");
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto dst = entries_[i].tensor.mutable_values();
    if (values[i].size() != dst.size()) throw Error(ErrorKind::ShapeMismatch, "snapshot size for " + entries_[i].name);
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

Linear make_linear(ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng) {
  return Linear{store.add(prefix + ".weight", ad::Shape::mat(in, out), Init::XavierUniform, rng),
                store.add(prefix + ".bias", ad::Shape::vec(out), Init::Zeros, rng)};
}

Adam::Adam(const ParameterStore& store, AdamConfig cfg) : store_(store), cfg_(cfg) {
  for (const auto& e : store.entries()) {
    m_.emplace_back(e.tensor.numel(), 0.0);
    v_.emplace_back(e.tensor.numel(), 0.0);
  }
}

void Adam::step() {
  const auto entries = store_.entries();
  if (entries.size() != m_.size()) throw Error(ErrorKind::ShapeMismatch, "parameters registered after optimizer");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < entries.size(); ++k) {
    ad::Tensor param = entries[k].tensor;
    if (!param.has_grad()) {
      // Zero gradient: the moments still decay.
      for (std::size_t i = 0; i < m_[k].size(); ++i) {
        m_[k][i] *= cfg_.beta1;
        v_[k][i] *= cfg_.beta2;
      }
    } else {
      const auto g = param.mutable_grad();
      for (std::size_t i = 0; i < m_[k].size(); ++i) {
        m_[k][i] = cfg_.beta1 * m_[k][i] + (1.0 - cfg_.beta1) * g[i];
        v_[k][i] = cfg_.beta2 * v_[k][i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      }
    }
    auto w = param.mutable_values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double m_hat = m_[k][i] / c1;
      const double v_hat = v_[k][i] / c2;
      w[i] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
    }
  }
}

namespace {
constexpr std::string_view kCheckpointMagic = "NFCK";
}

std::vector<std::uint8_t> encode_checkpoint(const ParameterStore& store) {
  bytes::Writer w;
  w.raw(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(store.entries().size()));
  for (const auto& e : store.entries()) {
    w.str(e.name);
    const auto& s = e.tensor.shape();
    w.u32(static_cast<std::uint32_t>(s.rank));
    for (std::size_t i = 0; i < s.rank; ++i) w.u64(s[i]);
    for (double v : e.tensor.values()) w.f64(v);
  }
  w.u64(bytes::fnv1a(w.buffer()));
  return std::move(w.buffer());
}

void decode_checkpoint(std::span<const std::uint8_t> data, ParameterStore& store) {
  bytes::Reader r(data);
  if (r.raw(kCheckpointMagic.size()) != kCheckpointMagic) throw Error(ErrorKind::Corrupt, "bad checkpoint magic");
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::VersionMismatch, "checkpoint version " + std::to_string(version));
  }
  const std::size_t count = r.u32();
  if (count != store.entries().size()) {
    throw Error(ErrorKind::ShapeMismatch, "checkpoint holds " + std::to_string(count) + " parameters, model has " +
                                              std::to_string(store.entries().size()));
  }
  std::vector<std::vector<double>> values;
  for (std::size_t k = 0; k < count; ++k) {
    const auto& entry = store.entries()[k];
    const auto name = r.str();
    if (name != entry.name) throw Error(ErrorKind::ShapeMismatch, "checkpoint parameter '" + name + "' vs '" + entry.name + "'");
    ad::Shape shape;
    shape.rank = r.u32();
    if (shape.rank > 3) throw Error(ErrorKind::Corrupt, "rank " + std::to_string(shape.rank));
    for (std::size_t i = 0; i < shape.rank; ++i) shape.dims[i] = r.u64();
    if (!(shape == entry.tensor.shape())) {
      throw Error(ErrorKind::ShapeMismatch, name + ": checkpoint " + shape.str() + " vs model " + entry.tensor.shape().str());
    }
    r.need(shape.numel() * 8);
    std::vector<double> v(shape.numel());
    for (auto& x : v) x = r.f64();
    values.push_back(std::move(v));
  }
  const std::size_t body = r.position();
  const auto hash = r.u64();
  if (r.remaining() != 0) throw Error(ErrorKind::Corrupt, "trailing bytes after checkpoint");
  if (hash != bytes::fnv1a(data.first(body))) throw Error(ErrorKind::Corrupt, "checkpoint hash mismatch");
  store.restore(values);
}

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store) {
  const auto data = encode_checkpoint(store);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

void load_checkpoint(const std::filesystem::path& path, ParameterStore& store) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  decode_checkpoint(data, store);
}

}  // namespace nfcast::nn
