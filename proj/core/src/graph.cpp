#include "nfcast/graph.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include "nfcast/bytes.hpp"
#include "nfcast/error.hpp"

namespace nfcast {

EdgeList WindowGraph::reverse(Relation r) const {
  const auto& fwd = relation(r);
  return EdgeList{fwd.target, fwd.conn};
}

WindowGraph build_graph(const Window& window, const IpVocabulary& vocab, std::size_t d_place) {
  if (d_place == 0) throw Error(ErrorKind::InvalidArgument, "d_place must be positive");
  WindowGraph g;
  g.window_index = window.window_index;
  const std::size_t n = window.records.size();
  const std::size_t width = n ? window.records.front().numerics.size() + kProtocolCategories : 0;
  g.conn_features = Matrix(n, width);
  for (auto& e : g.edges) {
    e.conn.reserve(n);
    e.target.reserve(n);
  }

  std::unordered_map<std::uint32_t, std::uint32_t> node_of_id;
  auto ip_node = [&](const Ipv4& ip) {
    const auto id = vocab.lookup(ip);
    const auto [it, inserted] = node_of_id.emplace(id, static_cast<std::uint32_t>(g.ip_ids.size()));
    if (inserted) g.ip_ids.push_back(id);
    return it->second;
  };
  auto attach = [&](Relation rel, std::uint32_t conn, std::uint32_t target) {
    g.edges[index(rel)].conn.push_back(conn);
    g.edges[index(rel)].target.push_back(target);
  };

  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = window.records[i];
    const auto feats = build_connection_features(r);
    if (feats.size() != width) throw Error(ErrorKind::ShapeMismatch, "flows disagree on numeric width");
    std::copy(feats.begin(), feats.end(), g.conn_features.row(i).begin());
    const auto c = static_cast<std::uint32_t>(i);
    attach(Relation::SrcIp, c, ip_node(r.src_ip));
    attach(Relation::DstIp, c, ip_node(r.dst_ip));
    attach(Relation::SrcPort, c, static_cast<std::uint32_t>(port_category(r.src_port)));
    attach(Relation::DstPort, c, static_cast<std::uint32_t>(port_category(r.dst_port)));
  }
  g.ip_features = Matrix(g.ip_ids.size(), d_place, 1.0);
  g.port_features = Matrix(kPortNodes, d_place, 1.0);
  return g;
}

std::vector<ForecastPair> pair_windows(std::span<const std::shared_ptr<const WindowGraph>> graphs) {
  std::vector<ForecastPair> pairs;
  for (std::size_t i = 0; i + 1 < graphs.size(); ++i) {
    if (graphs[i + 1]->window_index == graphs[i]->window_index + 1) pairs.push_back({graphs[i], graphs[i + 1]});
  }
  return pairs;
}

StructuralTargets structural_targets(const WindowGraph& next) {
  StructuralTargets t;
  const std::size_t n = next.n_conn();
  for (auto rel : kAllRelations) {
    const auto& e = next.relation(rel);
    if (e.size() != n) throw Error(ErrorKind::InvalidArgument, "targets need a graph without dropped edges");
    auto& out = t.classes[index(rel)];
    out.assign(n, 0);
    for (std::size_t k = 0; k < e.size(); ++k) {
      out[e.conn[k]] = targets_ip(rel) ? next.ip_ids.at(e.target[k]) : e.target[k];
    }
  }
  return t;
}

namespace {

constexpr std::string_view kGraphMagic = "FGW1";

void write_matrix(bytes::Writer& w, const Matrix& m) {
  w.u32(static_cast<std::uint32_t>(m.rows));
  w.u32(static_cast<std::uint32_t>(m.cols));
  for (double v : m.data) w.f64(v);
}

Matrix read_matrix(bytes::Reader& r) {
  const std::size_t rows = r.u32();
  const std::size_t cols = r.u32();
  r.need(rows * cols * 8);
  Matrix m(rows, cols);
  for (double& v : m.data) v = r.f64();
  return m;
}

}  // namespace

std::vector<std::uint8_t> serialize_graph(const WindowGraph& g) {
  bytes::Writer w;
  w.raw(kGraphMagic);
  w.u32(kGraphFormatVersion);
  w.u64(g.window_index);
  w.u32(static_cast<std::uint32_t>(g.ip_ids.size()));
  for (auto id : g.ip_ids) w.u32(id);
  write_matrix(w, g.ip_features);
  write_matrix(w, g.port_features);
  write_matrix(w, g.conn_features);
  for (const auto& e : g.edges) {
    w.u32(static_cast<std::uint32_t>(e.size()));
    for (std::size_t k = 0; k < e.size(); ++k) {
      w.u32(e.conn[k]);
      w.u32(e.target[k]);
    }
  }
  w.u64(bytes::fnv1a(w.buffer()));
  return std::move(w.buffer());
}

WindowGraph deserialize_graph(std::span<const std::uint8_t> data) {
  bytes::Reader r(data);
  if (r.raw(kGraphMagic.size()) != kGraphMagic) throw Error(ErrorKind::Corrupt, "bad graph magic");
  const auto version = r.u32();
  if (version != kGraphFormatVersion) {
    throw Error(ErrorKind::VersionMismatch, "graph format version " + std::to_string(version) + ", expected " +
                                                std::to_string(kGraphFormatVersion));
  }
  WindowGraph g;
  g.window_index = r.u64();
  const std::size_t n_ip = r.u32();
  r.need(n_ip * 4);
  g.ip_ids.resize(n_ip);
  for (auto& id : g.ip_ids) id = r.u32();
  g.ip_features = read_matrix(r);
  g.port_features = read_matrix(r);
  g.conn_features = read_matrix(r);
  for (std::size_t rel = 0; rel < kRelations; ++rel) {
    const std::size_t n = r.u32();
    r.need(n * 8);
    auto& e = g.edges[rel];
    e.conn.resize(n);
    e.target.resize(n);
    const std::size_t limit = rel < 2 ? n_ip : kPortNodes;
    for (std::size_t k = 0; k < n; ++k) {
      e.conn[k] = r.u32();
      e.target[k] = r.u32();
      if (e.conn[k] >= g.conn_features.rows || e.target[k] >= limit) {
        throw Error(ErrorKind::Corrupt, "edge endpoint out of range");
      }
    }
  }
  const std::size_t body = r.position();
  const auto checksum = r.u64();
  if (r.remaining() != 0) throw Error(ErrorKind::Corrupt, "trailing bytes after graph");
  if (checksum != bytes::fnv1a(data.first(body))) throw Error(ErrorKind::Corrupt, "graph checksum mismatch");
  if (g.ip_features.rows != n_ip || g.port_features.rows != kPortNodes) {
    throw Error(ErrorKind::Corrupt, "node section sizes disagree");
  }
  return g;
}

void write_graph_cache(const std::filesystem::path& dir, std::span<const WindowGraph> graphs) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest) throw Error(ErrorKind::Io, "cannot write " + (dir / "manifest.csv").string());
  manifest << "window_index,file,n_ips\n";
  for (const auto& g : graphs) {
    std::ostringstream name;
    name << "window_" << std::setw(6) << std::setfill('0') << g.window_index << ".fgw";
    const auto bytes = serialize_graph(g);
    std::ofstream out(dir / name.str(), std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + (dir / name.str()).string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    manifest << g.window_index << ',' << name.str() << ',' << g.n_ip() << '\n';
  }
}

std::vector<WindowGraph> read_graph_cache(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.csv");
  if (!manifest) throw Error(ErrorKind::Io, "cannot open " + (dir / "manifest.csv").string());
  std::string line;
  std::getline(manifest, line);
  std::vector<WindowGraph> graphs;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string idx, file;
    std::getline(ss, idx, ',');
    std::getline(ss, file, ',');
    std::ifstream in(dir / file, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + (dir / file).string());
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    graphs.push_back(deserialize_graph(data));
    if (graphs.back().window_index != std::stoull(idx)) {
      throw Error(ErrorKind::Corrupt, file + ": window index disagrees with manifest");
    }
  }
  return graphs;
}

}  // namespace nfcast
