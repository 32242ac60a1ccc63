#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nfcast {

using Ipv4 = std::array<std::uint8_t, 4>;

std::string format_ipv4(const Ipv4& ip);
/// Throws Error(OutOfRange) for anything that is not a dotted quad of octets.
Ipv4 parse_ipv4(std::string_view text);
constexpr std::uint32_t ipv4_key(const Ipv4& ip) noexcept {
  return (std::uint32_t{ip[0]} << 24) | (std::uint32_t{ip[1]} << 16) |
         (std::uint32_t{ip[2]} << 8) | std::uint32_t{ip[3]};
}

struct FlowRecord {
  Ipv4 src_ip{};
  Ipv4 dst_ip{};
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t protocol = 0;
  std::int64_t start_time_us = 0;
  std::vector<double> numerics;

  bool operator==(const FlowRecord&) const = default;
};

/// Column-name mapping for flow CSV files. The numeric column list fixes F.
struct FlowSchema {
  std::string src_ip = "src_ip";
  std::string dst_ip = "dst_ip";
  std::string src_port = "src_port";
  std::string dst_port = "dst_port";
  std::string protocol = "protocol";
  std::string start_time = "start_time_us";
  std::vector<std::string> numeric_columns = {"duration_ms", "bytes_src_dst", "bytes_dst_src",
                                              "packets_src_dst", "packets_dst_src"};

  std::size_t feature_count() const noexcept { return numeric_columns.size(); }
};

/// Reads flows in file order. A file without data rows (or without any
/// content) yields an empty list. Throws Error(MissingColumn) when the header
/// lacks a mapped column and Error(MalformedRow) naming the line number for
/// unparsable or out-of-range fields.
std::vector<FlowRecord> parse_flow_csv(std::istream& in, const FlowSchema& schema = {});
std::vector<FlowRecord> parse_flow_csv(const std::filesystem::path& path,
                                       const FlowSchema& schema = {});

/// Writes the header plus one row per record; doubles use shortest round-trip
/// formatting so parse_flow_csv reproduces the records bit for bit.
void write_flow_csv(std::ostream& out, std::span<const FlowRecord> records,
                    const FlowSchema& schema = {});
void write_flow_csv(const std::filesystem::path& path, std::span<const FlowRecord> records,
                    const FlowSchema& schema = {});

/// Stable sort by start time.
std::vector<FlowRecord> sort_by_start(std::vector<FlowRecord> records);

struct ServicePort {
  std::uint16_t port = 0;
  double probability = 0.0;
};

struct TraceConfig {
  std::size_t n_flows = 10000;
  std::size_t n_heavy_ips = 4;
  std::size_t n_background_ips = 8;
  std::vector<ServicePort> service_port_mix = {
      {443, 0.35}, {53, 0.2}, {80, 0.15}, {123, 0.1}, {8080, 0.1}, {0, 0.05}, {3306, 0.05}};
  double heavy_talker_weight = 0.8;
  std::uint64_t seed = 1;
  // Persistent conversations replayed in a fixed cycle; a window whose length
  // is a multiple of the roster sees the same conversation at the same slot.
  std::size_t roster_size = 16;
  // Probability that a slot carries a one-off flow instead of its conversation.
  double churn = 0.1;

  /// Throws Error(InvalidArgument) when counts or probabilities are invalid.
  void validate() const;
};

/// Deterministic in cfg: identical configs give identical traces.
std::vector<FlowRecord> generate_synthetic_trace(const TraceConfig& cfg);

}  // namespace nfcast
