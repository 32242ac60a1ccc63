#include "nfcast/preprocess.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "nfcast/error.hpp"
#include "nfcast/rng.hpp"

namespace nfcast {

PortCategory port_category(std::uint16_t port) noexcept {
  switch (port) {
    case 0: return PortCategory::Port0;
    case 53: return PortCategory::Port53;
    case 123: return PortCategory::Port123;
    case 443: return PortCategory::Port443;
    default: break;
  }
  if (port <= 1023) return PortCategory::WellKnown;
  if (port <= 49151) return PortCategory::Registered;
  return PortCategory::DynamicPrivate;
}

PortEncoding encode_port(long port) {
  if (port < 0 || port > 65535) throw Error(ErrorKind::OutOfRange, "port " + std::to_string(port));
  PortEncoding enc;
  enc.category = port_category(static_cast<std::uint16_t>(port));
  enc.one_hot[enc.index()] = 1.0;
  return enc;
}

ProtocolEncoding encode_protocol(long protocol) {
  if (protocol < 0 || protocol > 255) {
    throw Error(ErrorKind::OutOfRange, "protocol " + std::to_string(protocol));
  }
  ProtocolEncoding enc;
  switch (protocol) {
    case 1: enc.category = ProtocolCategory::Icmp; break;
    case 6: enc.category = ProtocolCategory::Tcp; break;
    case 17: enc.category = ProtocolCategory::Udp; break;
    default: enc.category = ProtocolCategory::Others; break;
  }
  enc.one_hot[enc.index()] = 1.0;
  return enc;
}

std::vector<double> l2_normalize(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(ErrorKind::NonFinite, "l2_normalize input");
    sq += x * x;
  }
  std::vector<double> out(v.begin(), v.end());
  if (sq == 0.0) return out;
  const double norm = std::sqrt(sq);
  for (double& x : out) x /= norm;
  return out;
}

std::vector<double> build_connection_features(const FlowRecord& r) {
  auto out = l2_normalize(r.numerics);
  const auto proto = encode_protocol(r.protocol);
  out.insert(out.end(), proto.one_hot.begin(), proto.one_hot.end());
  return out;
}

std::vector<Window> make_windows(std::span<const FlowRecord> records, std::size_t length, std::size_t stride) {
  if (length == 0) throw Error(ErrorKind::InvalidArgument, "window length must be positive");
  if (stride != length) throw Error(ErrorKind::InvalidArgument, "only non-overlapping windows (stride == length)");
  std::vector<Window> windows;
  const std::size_t n = records.size() / length;
  windows.reserve(n);
  for (std::size_t w = 0; w < n; ++w) {
    Window win;
    win.window_index = w;
    const auto first = records.begin() + static_cast<std::ptrdiff_t>(w * length);
    win.records.assign(first, first + static_cast<std::ptrdiff_t>(length));
    windows.push_back(std::move(win));
  }
  return windows;
}

std::string_view to_string(Split s) noexcept {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw Error(ErrorKind::InvalidArgument, "unknown split '" + std::string(s) + "'");
}

std::size_t SplitAssignment::count(Split s) const noexcept {
  std::size_t n = 0;
  for (auto l : labels) n += (l == s);
  return n;
}

std::vector<std::size_t> SplitAssignment::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == s) out.push_back(i);
  }
  return out;
}

SplitAssignment split_windows(std::size_t n_windows, SplitRatios ratios, std::uint64_t seed) {
  if (n_windows < 10) {
    throw Error(ErrorKind::TooFewWindows, std::to_string(n_windows) + " windows, need at least 10");
  }
  const double total = ratios.train + ratios.val + ratios.test;
  if (!(ratios.train >= 0 && ratios.val >= 0 && ratios.test >= 0) || std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorKind::InvalidArgument, "split ratios must be non-negative and sum to 1");
  }
  const auto n = static_cast<double>(n_windows);
  auto n_train = static_cast<std::size_t>(std::llround(ratios.train * n));
  auto n_val = static_cast<std::size_t>(std::llround(ratios.val * n));
  if (n_train > n_windows) n_train = n_windows;
  if (n_train + n_val > n_windows) n_val = n_windows - n_train;

  std::vector<std::size_t> order(n_windows);
  for (std::size_t i = 0; i < n_windows; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  SplitAssignment out;
  out.seed = seed;
  out.labels.assign(n_windows, Split::Test);
  for (std::size_t k = 0; k < n_windows; ++k) {
    out.labels[order[k]] = k < n_train ? Split::Train : (k < n_train + n_val ? Split::Val : Split::Test);
  }
  return out;
}

void write_split_csv(const std::filesystem::path& path, const SplitAssignment& split) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << "window_index,label,seed\n";
  for (std::size_t i = 0; i < split.labels.size(); ++i) {
    out << i << ',' << to_string(split.labels[i]) << ',' << split.seed << '\n';
  }
}

SplitAssignment read_split_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("window_index,label,seed", 0) != 0) throw Error(ErrorKind::Corrupt, path.string() + ": bad header");
  SplitAssignment split;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string idx, label, seed;
    std::getline(ss, idx, ',');
    std::getline(ss, label, ',');
    std::getline(ss, seed, ',');
    if (std::stoull(idx) != split.labels.size()) throw Error(ErrorKind::Corrupt, path.string() + ": index gap");
    split.labels.push_back(parse_split(label));
    split.seed = std::stoull(seed);
  }
  return split;
}

void IpVocabulary::add(const Ipv4& ip) {
  const auto key = ipv4_key(ip);
  if (ids_.contains(key)) return;
  ips_.push_back(ip);
  ids_.emplace(key, static_cast<std::uint32_t>(ips_.size()));
}

std::uint32_t IpVocabulary::lookup(const Ipv4& ip) const noexcept {
  const auto it = ids_.find(ipv4_key(ip));
  return it == ids_.end() ? kOov : it->second;
}

const Ipv4& IpVocabulary::address(std::uint32_t id) const {
  if (id == kOov || id > ips_.size()) throw Error(ErrorKind::IndexOutOfBounds, "vocabulary id " + std::to_string(id));
  return ips_[id - 1];
}

void IpVocabulary::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << "ip,id\n";
  for (std::size_t i = 0; i < ips_.size(); ++i) out << format_ipv4(ips_[i]) << ',' << (i + 1) << '\n';
}

IpVocabulary IpVocabulary::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("ip,id", 0) != 0) throw Error(ErrorKind::Corrupt, path.string() + ": bad header");
  IpVocabulary vocab;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(ErrorKind::Corrupt, path.string() + ": bad row");
    const auto ip = parse_ipv4(line.substr(0, comma));
    vocab.add(ip);
    if (vocab.lookup(ip) != std::stoul(line.substr(comma + 1))) {
      throw Error(ErrorKind::Corrupt, path.string() + ": ids out of order");
    }
  }
  return vocab;
}

IpVocabulary build_ip_vocabulary(std::span<const Window> train_windows) {
  IpVocabulary vocab;
  for (const auto& w : train_windows) {
    for (const auto& r : w.records) {
      vocab.add(r.src_ip);
      vocab.add(r.dst_ip);
    }
  }
  return vocab;
}

}  // namespace nfcast
