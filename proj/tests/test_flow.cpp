#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "nfcast/error.hpp"
#include "nfcast/flow.hpp"

using namespace nfcast;

namespace {

const char* kHeader =
    "src_ip,dst_ip,src_port,dst_port,protocol,start_time_us,duration_ms,bytes_src_dst,bytes_dst_src,"
    "packets_src_dst,packets_dst_src\n";

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("a CSV row maps field by field") {
  std::istringstream in(std::string(kHeader) + "10.0.0.1,10.0.0.2,51000,443,6,1000,12.5,300,900,4,6\n");
  const auto flows = parse_flow_csv(in);
  REQUIRE(flows.size() == 1);
  const auto& r = flows[0];
  CHECK(r.src_ip == Ipv4{10, 0, 0, 1});
  CHECK(r.dst_ip == Ipv4{10, 0, 0, 2});
  CHECK(r.src_port == 51000);
  CHECK(r.dst_port == 443);
  CHECK(r.protocol == 6);
  CHECK(r.start_time_us == 1000);
  CHECK(r.numerics == std::vector<double>{12.5, 300, 900, 4, 6});
}

TEST_CASE("header-only and empty files give no flows") {
  std::istringstream header_only(kHeader);
  CHECK(parse_flow_csv(header_only).empty());
  std::istringstream empty("");
  CHECK(parse_flow_csv(empty).empty());
}

TEST_CASE("bad rows are rejected with their kind") {
  auto parse = [](const std::string& row) {
    std::istringstream in(std::string(kHeader) + row + "\n");
    return parse_flow_csv(in);
  };
  CHECK(kind_of([&] { parse("10.0.0.1,10.0.0.2,70000,443,6,1000,1,1,1,1,1"); }) == ErrorKind::MalformedRow);
  CHECK(kind_of([&] { parse("10.0.0.256,10.0.0.2,1,443,6,1000,1,1,1,1,1"); }) == ErrorKind::MalformedRow);
  CHECK(kind_of([&] { parse("10.0.0.1,10.0.0.2,1,443,300,1000,1,1,1,1,1"); }) == ErrorKind::MalformedRow);
  CHECK(kind_of([&] { parse("10.0.0.1,10.0.0.2,1,443,6,1000,1,1,1,1"); }) == ErrorKind::MalformedRow);
  CHECK(kind_of([&] { parse("10.0.0.1,10.0.0.2,1,443,6,1000,x,1,1,1,1"); }) == ErrorKind::MalformedRow);
  CHECK(kind_of([&] { parse("10.0.0.1,10.0.0.2,1,443,6,1000,-1,1,1,1,1"); }) == ErrorKind::MalformedRow);
  std::istringstream missing("src_ip,dst_ip\n1.2.3.4,5.6.7.8\n");
  CHECK(kind_of([&] { parse_flow_csv(missing); }) == ErrorKind::MissingColumn);
}

TEST_CASE("the error message names the offending line") {
  std::istringstream in(std::string(kHeader) + "10.0.0.1,10.0.0.2,1,443,6,1000,1,1,1,1,1\n" +
                        "10.0.0.1,10.0.0.2,1,99999,6,1000,1,1,1,1,1\n");
  try {
    parse_flow_csv(in);
    FAIL("expected MalformedRow");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }
}

TEST_CASE("custom schemas remap columns and change F") {
  FlowSchema schema;
  schema.src_ip = "sa";
  schema.numeric_columns = {"bytes"};
  std::istringstream in(
      "bytes,sa,dst_ip,src_port,dst_port,protocol,start_time_us\n7.5,1.2.3.4,5.6.7.8,1,2,17,9\n");
  const auto flows = parse_flow_csv(in, schema);
  REQUIRE(flows.size() == 1);
  CHECK(flows[0].numerics == std::vector<double>{7.5});
  CHECK(flows[0].src_ip == Ipv4{1, 2, 3, 4});
}

TEST_CASE("write then parse reproduces the records exactly") {
  TraceConfig cfg;
  cfg.n_flows = 300;
  const auto flows = generate_synthetic_trace(cfg);
  std::stringstream buf;
  write_flow_csv(buf, flows);
  CHECK(parse_flow_csv(buf) == flows);
}

TEST_CASE("sort_by_start is stable") {
  CHECK(sort_by_start({}).empty());
  std::vector<FlowRecord> v(4);
  v[0].start_time_us = 5;
  v[0].src_port = 1;
  v[1].start_time_us = 1;
  v[2].start_time_us = 5;
  v[2].src_port = 2;
  v[3].start_time_us = 3;
  const auto s = sort_by_start(v);
  CHECK(s[0].start_time_us == 1);
  CHECK(s[1].start_time_us == 3);
  CHECK(s[2].src_port == 1);
  CHECK(s[3].src_port == 2);
  CHECK(sort_by_start(s) == s);
}

TEST_CASE("synthetic traces") {
  TraceConfig cfg;
  cfg.n_flows = 0;
  CHECK(generate_synthetic_trace(cfg).empty());

  cfg.n_flows = 10000;
  cfg.heavy_talker_weight = 0.8;
  cfg.n_heavy_ips = 4;
  const auto a = generate_synthetic_trace(cfg);
  CHECK(a == generate_synthetic_trace(cfg));
  REQUIRE(a.size() == 10000);

  // Heavy talkers live in 10.0.0.0/16.
  const auto heavy = std::count_if(a.begin(), a.end(), [](const FlowRecord& r) {
    return (r.src_ip[0] == 10 && r.src_ip[1] == 0) || (r.dst_ip[0] == 10 && r.dst_ip[1] == 0);
  });
  CHECK(static_cast<double>(heavy) / static_cast<double>(a.size()) >= 0.7);
  CHECK(std::is_sorted(a.begin(), a.end(),
                       [](const FlowRecord& x, const FlowRecord& y) { return x.start_time_us < y.start_time_us; }));
  for (const auto& r : a) {
    CHECK(r.numerics.size() == 5);
    CHECK(std::all_of(r.numerics.begin(), r.numerics.end(), [](double x) { return x >= 0.0; }));
  }

  cfg.seed = 2;
  CHECK_FALSE(generate_synthetic_trace(cfg) == a);
}

TEST_CASE("invalid trace configs") {
  TraceConfig cfg;
  cfg.heavy_talker_weight = 1.5;
  CHECK(kind_of([&] { cfg.validate(); }) == ErrorKind::InvalidArgument);
  cfg = {};
  cfg.n_heavy_ips = 0;
  CHECK(kind_of([&] { generate_synthetic_trace(cfg); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("dotted quads") {
  CHECK(format_ipv4({192, 168, 0, 255}) == "192.168.0.255");
  CHECK(parse_ipv4("0.0.0.0") == Ipv4{0, 0, 0, 0});
  for (const char* bad : {"1.2.3", "1.2.3.4.5", "a.b.c.d", "1.2.3.256", "", "1..2.3"}) {
    CHECK(kind_of([&] { parse_ipv4(bad); }) == ErrorKind::OutOfRange);
  }
}
