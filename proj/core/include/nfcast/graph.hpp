#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "nfcast/matrix.hpp"
#include "nfcast/preprocess.hpp"

namespace nfcast {

/// Typed connection edges. Each relation points from a connection node to an
/// IP node (index into WindowGraph::ip_ids) or a port node (0..7). The reverse
/// direction is implicit: every stored edge is traversed both ways.
enum class Relation : std::uint8_t { SrcIp = 0, DstIp, SrcPort, DstPort };
inline constexpr std::size_t kRelations = 4;
inline constexpr std::array<Relation, kRelations> kAllRelations{Relation::SrcIp, Relation::DstIp,
                                                                Relation::SrcPort, Relation::DstPort};
constexpr std::size_t index(Relation r) noexcept { return static_cast<std::size_t>(r); }
constexpr bool targets_ip(Relation r) noexcept { return r == Relation::SrcIp || r == Relation::DstIp; }

struct EdgeList {
  std::vector<std::uint32_t> conn;
  std::vector<std::uint32_t> target;

  std::size_t size() const noexcept { return conn.size(); }
  bool operator==(const EdgeList&) const = default;
};

struct WindowGraph {
  std::uint64_t window_index = 0;
  std::vector<std::uint32_t> ip_ids;  // vocabulary id per IP node
  Matrix ip_features;                 // n_ip x d_place, ones
  Matrix port_features;               // 8 x d_place, ones
  Matrix conn_features;               // L x (F + 4)
  std::array<EdgeList, kRelations> edges;

  std::size_t n_conn() const noexcept { return conn_features.rows; }
  std::size_t n_ip() const noexcept { return ip_ids.size(); }
  std::size_t d_place() const noexcept { return port_features.cols; }
  const EdgeList& relation(Relation r) const noexcept { return edges[index(r)]; }
  /// Reverse copy of a relation: (target -> conn) pairs in the same order.
  EdgeList reverse(Relation r) const;

  bool operator==(const WindowGraph&) const = default;
};

/// One node per flow, one per distinct IP (unseen IPs share the OOV node), and
/// always eight port nodes. Edge lists hold exactly one edge per connection in
/// connection order.
WindowGraph build_graph(const Window& window, const IpVocabulary& vocab, std::size_t d_place = 8);

struct ForecastPair {
  std::shared_ptr<const WindowGraph> current;
  std::shared_ptr<const WindowGraph> next;
};

/// Pairs graphs with consecutive window indices; gaps break the chain.
std::vector<ForecastPair> pair_windows(std::span<const std::shared_ptr<const WindowGraph>> graphs);

/// Per next-window connection: vocabulary ids for the IP relations and port
/// categories for the port relations, indexed by Relation.
struct StructuralTargets {
  std::array<std::vector<std::uint32_t>, kRelations> classes;

  std::size_t rows() const noexcept { return classes[0].size(); }
};

/// Reads the attachments of a fully built graph (one edge per connection).
StructuralTargets structural_targets(const WindowGraph& next);
inline StructuralTargets structural_targets(const ForecastPair& pair) { return structural_targets(*pair.next); }

inline constexpr std::uint32_t kGraphFormatVersion = 1;

std::vector<std::uint8_t> serialize_graph(const WindowGraph& g);
/// Throws Error(VersionMismatch) for a foreign version and Error(Corrupt) for
/// bad magic, truncation, trailing bytes, inconsistent indices or a checksum mismatch.
WindowGraph deserialize_graph(std::span<const std::uint8_t> bytes);

/// One file per graph plus manifest.csv (window_index,file,n_ips).
void write_graph_cache(const std::filesystem::path& dir, std::span<const WindowGraph> graphs);
std::vector<WindowGraph> read_graph_cache(const std::filesystem::path& dir);

}  // namespace nfcast
