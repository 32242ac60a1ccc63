#include "nfcast/flow.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include "nfcast/error.hpp"

namespace nfcast {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return fields;
}

template <class Int>
std::optional<Int> parse_int(std::string_view s) {
  Int value{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc{} || ptr != end || s.empty()) return std::nullopt;
  return value;
}

std::optional<double> parse_double(std::string_view s) {
  double value = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc{} || ptr != end || s.empty()) return std::nullopt;
  return value;
}

std::optional<Ipv4> try_parse_ipv4(std::string_view text) {
  Ipv4 ip{};
  std::size_t start = 0;
  for (std::size_t octet = 0; octet < 4; ++octet) {
    const auto pos = text.find('.', start);
    const bool last = octet == 3;
    if (last != (pos == std::string_view::npos)) return std::nullopt;
    const auto part = last ? text.substr(start) : text.substr(start, pos - start);
    const auto value = parse_int<int>(part);
    if (!value || *value < 0 || *value > 255) return std::nullopt;
    ip[octet] = static_cast<std::uint8_t>(*value);
    start = pos + 1;
  }
  return ip;
}

[[noreturn]] void malformed(std::size_t line, const std::string& what) {
  throw Error(ErrorKind::MalformedRow, "line " + std::to_string(line) + ": " + what);
}

void append_double(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

std::string format_ipv4(const Ipv4& ip) {
  return std::to_string(ip[0]) + '.' + std::to_string(ip[1]) + '.' + std::to_string(ip[2]) + '.' +
         std::to_string(ip[3]);
}

Ipv4 parse_ipv4(std::string_view text) {
  const auto ip = try_parse_ipv4(trim(text));
  if (!ip) throw Error(ErrorKind::OutOfRange, "not an IPv4 address: '" + std::string(text) + "'");
  return *ip;
}

std::vector<FlowRecord> parse_flow_csv(std::istream& in, const FlowSchema& schema) {
  std::vector<FlowRecord> records;
  std::string line;
  std::size_t line_no = 0;

  // Header (skipping leading blank lines).
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    for (auto f : split_commas(line)) header.emplace_back(f);
    break;
  }
  if (header.empty()) return records;

  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorKind::MissingColumn, "column '" + name + "' not in header");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_src = column(schema.src_ip);
  const std::size_t c_dst = column(schema.dst_ip);
  const std::size_t c_sport = column(schema.src_port);
  const std::size_t c_dport = column(schema.dst_port);
  const std::size_t c_proto = column(schema.protocol);
  const std::size_t c_time = column(schema.start_time);
  std::vector<std::size_t> c_num;
  for (const auto& name : schema.numeric_columns) c_num.push_back(column(name));

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != header.size()) {
      malformed(line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                             std::to_string(fields.size()));
    }
    FlowRecord r;
    const auto src = try_parse_ipv4(fields[c_src]);
    const auto dst = try_parse_ipv4(fields[c_dst]);
    if (!src) malformed(line_no, "bad source address '" + std::string(fields[c_src]) + "'");
    if (!dst) malformed(line_no, "bad destination address '" + std::string(fields[c_dst]) + "'");
    r.src_ip = *src;
    r.dst_ip = *dst;

    auto port = [&](std::size_t c) {
      const auto v = parse_int<long long>(fields[c]);
      if (!v || *v < 0 || *v > 65535) malformed(line_no, "port out of range: '" + std::string(fields[c]) + "'");
      return static_cast<std::uint16_t>(*v);
    };
    r.src_port = port(c_sport);
    r.dst_port = port(c_dport);
    const auto proto = parse_int<long long>(fields[c_proto]);
    if (!proto || *proto < 0 || *proto > 255) {
      malformed(line_no, "protocol out of range: '" + std::string(fields[c_proto]) + "'");
    }
    r.protocol = static_cast<std::uint8_t>(*proto);
    const auto t = parse_int<std::int64_t>(fields[c_time]);
    if (!t) malformed(line_no, "bad start time '" + std::string(fields[c_time]) + "'");
    r.start_time_us = *t;

    r.numerics.reserve(c_num.size());
    for (std::size_t c : c_num) {
      const auto v = parse_double(fields[c]);
      if (!v || !std::isfinite(*v) || *v < 0.0) {
        malformed(line_no, "numeric field '" + header[c] + "' invalid: '" + std::string(fields[c]) + "'");
      }
      r.numerics.push_back(*v);
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<FlowRecord> parse_flow_csv(const std::filesystem::path& path, const FlowSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return parse_flow_csv(in, schema);
}

void write_flow_csv(std::ostream& out, std::span<const FlowRecord> records, const FlowSchema& schema) {
  std::string buf = schema.src_ip + ',' + schema.dst_ip + ',' + schema.src_port + ',' + schema.dst_port +
                    ',' + schema.protocol + ',' + schema.start_time;
  for (const auto& name : schema.numeric_columns) buf += ',' + name;
  buf += '\n';
  out << buf;
  for (const auto& r : records) {
    buf.clear();
    buf += format_ipv4(r.src_ip);
    buf += ',';
    buf += format_ipv4(r.dst_ip);
    buf += ',' + std::to_string(r.src_port) + ',' + std::to_string(r.dst_port) + ',' +
           std::to_string(r.protocol) + ',' + std::to_string(r.start_time_us);
    for (double v : r.numerics) {
      buf += ',';
      append_double(buf, v);
    }
    buf += '\n';
    out << buf;
  }
}

void write_flow_csv(const std::filesystem::path& path, std::span<const FlowRecord> records,
                    const FlowSchema& schema) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  write_flow_csv(out, records, schema);
}

std::vector<FlowRecord> sort_by_start(std::vector<FlowRecord> records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const FlowRecord& a, const FlowRecord& b) { return a.start_time_us < b.start_time_us; });
  return records;
}

}  // namespace nfcast
