#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nfcast/flow.hpp"

namespace nfcast {

inline constexpr std::size_t kPortCategories = 7;
inline constexpr std::size_t kPortNodes = 8;  // the last node is reserved and never attached
inline constexpr std::size_t kProtocolCategories = 4;

enum class PortCategory : std::uint8_t {
  Port0 = 0,
  Port53,
  Port123,
  Port443,
  WellKnown,
  Registered,
  DynamicPrivate,
  Reserved,
};

enum class ProtocolCategory : std::uint8_t { Icmp = 0, Tcp, Udp, Others };

/// Category labels for the one-hot encoders, in encoding order.
struct OheSchema {
  std::array<std::string_view, kPortCategories> port_categories{
      "Port0", "Port53", "Port123", "Port443", "WellKnown", "Registered", "DynamicPrivate"};
  std::array<std::string_view, kProtocolCategories> protocol_categories{"ICMP", "TCP", "UDP", "Others"};
};

struct PortEncoding {
  std::array<double, kPortCategories> one_hot{};
  PortCategory category = PortCategory::Port0;
  std::size_t index() const noexcept { return static_cast<std::size_t>(category); }
};

struct ProtocolEncoding {
  std::array<double, kProtocolCategories> one_hot{};
  ProtocolCategory category = ProtocolCategory::Others;
  std::size_t index() const noexcept { return static_cast<std::size_t>(category); }
};

/// Specific ports (0, 53, 123, 443) win over the range buckets.
/// Throws Error(OutOfRange) outside [0, 65535].
PortEncoding encode_port(long port);
PortCategory port_category(std::uint16_t port) noexcept;

/// ICMP=1, TCP=6, UDP=17, everything else Others. Throws Error(OutOfRange) outside [0, 255].
ProtocolEncoding encode_protocol(long protocol);

/// Row-wise L2 normalization; the zero vector maps to itself.
/// Throws Error(NonFinite) on NaN or infinite input.
std::vector<double> l2_normalize(std::span<const double> v);

/// l2_normalize(numerics) followed by the protocol one-hot: F + 4 values.
std::vector<double> build_connection_features(const FlowRecord& r);

struct Window {
  std::vector<FlowRecord> records;
  std::size_t window_index = 0;
};

/// Non-overlapping windows; a trailing partial window is dropped.
/// Throws Error(InvalidArgument) if length is zero or stride differs from length.
std::vector<Window> make_windows(std::span<const FlowRecord> records, std::size_t length = 512,
                                 std::size_t stride = 512);

enum class Split : std::uint8_t { Train, Val, Test };
std::string_view to_string(Split s) noexcept;
Split parse_split(std::string_view s);

struct SplitRatios {
  double train = 0.7;
  double val = 0.2;
  double test = 0.1;
};

struct SplitAssignment {
  std::vector<Split> labels;  // indexed by window position
  std::uint64_t seed = 0;

  std::size_t count(Split s) const noexcept;
  std::vector<std::size_t> indices(Split s) const;
};

/// Seeded uniform permutation followed by a proportional cut.
/// Throws Error(TooFewWindows) below 10 windows.
SplitAssignment split_windows(std::size_t n_windows, SplitRatios ratios, std::uint64_t seed);

/// CSV with header window_index,label,seed.
void write_split_csv(const std::filesystem::path& path, const SplitAssignment& split);
SplitAssignment read_split_csv(const std::filesystem::path& path);

class IpVocabulary {
 public:
  static constexpr std::uint32_t kOov = 0;

  /// Ids follow first appearance (src before dst within a flow), starting at 1.
  void add(const Ipv4& ip);
  std::uint32_t lookup(const Ipv4& ip) const noexcept;
  /// Number of ids including the reserved OOV id.
  std::size_t size() const noexcept { return ips_.size() + 1; }
  /// Address for id >= 1.
  const Ipv4& address(std::uint32_t id) const;

  void write_csv(const std::filesystem::path& path) const;
  static IpVocabulary read_csv(const std::filesystem::path& path);

 private:
  std::unordered_map<std::uint32_t, std::uint32_t> ids_;
  std::vector<Ipv4> ips_;
};

IpVocabulary build_ip_vocabulary(std::span<const Window> train_windows);

}  // namespace nfcast
