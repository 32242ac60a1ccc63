#include <cmath>
#include <numeric>

#include "nfcast/error.hpp"
#include "nfcast/flow.hpp"
#include "nfcast/rng.hpp"

namespace nfcast {
namespace {

constexpr std::int64_t kTraceEpochUs = 1'700'000'000'000'000;

struct Conversation {
  Ipv4 src{};
  Ipv4 dst{};
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t protocol = 0;
  std::array<double, 5> profile{};  // duration, bytes s->d, bytes d->s, packets s->d, packets d->s
};

class TraceBuilder {
 public:
  explicit TraceBuilder(const TraceConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
    for (std::size_t i = 0; i < cfg.n_heavy_ips; ++i) {
      heavy_.push_back({10, 0, static_cast<std::uint8_t>(i / 250), static_cast<std::uint8_t>(i % 250 + 1)});
    }
    for (std::size_t i = 0; i < cfg.n_background_ips; ++i) {
      background_.push_back(
          {172, 16, static_cast<std::uint8_t>(i / 250), static_cast<std::uint8_t>(i % 250 + 1)});
    }
    all_ = heavy_;
    all_.insert(all_.end(), background_.begin(), background_.end());
  }

  std::vector<FlowRecord> build() {
    std::vector<Conversation> roster;
    const auto n_heavy_src =
        static_cast<std::size_t>(std::llround(cfg_.heavy_talker_weight * static_cast<double>(cfg_.roster_size)));
    for (std::size_t i = 0; i < cfg_.roster_size; ++i) roster.push_back(conversation(i < n_heavy_src));
    rng_.shuffle(roster);

    std::vector<FlowRecord> out;
    out.reserve(cfg_.n_flows);
    std::int64_t t = kTraceEpochUs;
    for (std::size_t i = 0; i < cfg_.n_flows; ++i) {
      t += 1 + static_cast<std::int64_t>(rng_.uniform_int(2000));
      const bool one_off = rng_.bernoulli(cfg_.churn);
      const Conversation conv = one_off ? conversation(rng_.bernoulli(cfg_.heavy_talker_weight))
                                        : roster[i % roster.size()];
      out.push_back(emit(conv, t));
    }
    return out;
  }

 private:
  Ipv4 pick(const std::vector<Ipv4>& pool) { return pool[rng_.uniform_int(pool.size())]; }

  std::uint16_t service_port() {
    double u = rng_.uniform();
    for (const auto& sp : cfg_.service_port_mix) {
      if (u < sp.probability) return sp.port;
      u -= sp.probability;
    }
    return cfg_.service_port_mix.back().port;
  }

  Conversation conversation(bool heavy_source) {
    Conversation c;
    c.src = heavy_source ? pick(heavy_) : pick(background_);
    do {
      c.dst = pick(all_);
    } while (c.dst == c.src);
    c.dst_port = service_port();
    if (c.dst_port == 0) {
      c.protocol = 1;
      c.src_port = 0;
    } else {
      c.protocol = (c.dst_port == 53 || c.dst_port == 123) ? 17 : 6;
      c.src_port = rng_.bernoulli(0.7) ? static_cast<std::uint16_t>(49152 + rng_.uniform_int(16384))
                                       : static_cast<std::uint16_t>(1024 + rng_.uniform_int(48128));
    }
    const double pkts_sd = 1.0 + static_cast<double>(rng_.uniform_int(40));
    const double pkts_ds = 1.0 + static_cast<double>(rng_.uniform_int(40));
    c.profile = {rng_.uniform(1.0, 2000.0), pkts_sd * rng_.uniform(60.0, 1400.0),
                 pkts_ds * rng_.uniform(60.0, 1400.0), pkts_sd, pkts_ds};
    return c;
  }

  FlowRecord emit(const Conversation& c, std::int64_t t) {
    FlowRecord r;
    r.src_ip = c.src;
    r.dst_ip = c.dst;
    r.src_port = c.src_port;
    r.dst_port = c.dst_port;
    r.protocol = c.protocol;
    r.start_time_us = t;
    r.numerics.reserve(c.profile.size());
    for (double base : c.profile) {
      const double v = base * std::exp(rng_.normal(0.0, 0.15));
      // Round to 3 decimals so the CSV stays compact.
      r.numerics.push_back(std::round(v * 1000.0) / 1000.0);
    }
    return r;
  }

  const TraceConfig& cfg_;
  Rng rng_;
  std::vector<Ipv4> heavy_;
  std::vector<Ipv4> background_;
  std::vector<Ipv4> all_;
};

}  // namespace

void TraceConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidArgument, "trace config: " + what); };
  if (n_heavy_ips == 0 || n_background_ips == 0) fail("IP pool counts must be positive");
  if (n_heavy_ips > 250 * 256 || n_background_ips > 250 * 256) fail("IP pool too large");
  if (roster_size == 0) fail("roster_size must be positive");
  if (!(heavy_talker_weight > 0.0 && heavy_talker_weight < 1.0)) fail("heavy_talker_weight must lie in (0,1)");
  if (!(churn >= 0.0 && churn <= 1.0)) fail("churn must lie in [0,1]");
  if (service_port_mix.empty()) fail("service_port_mix is empty");
  double total = 0.0;
  for (const auto& sp : service_port_mix) {
    if (!(sp.probability >= 0.0)) fail("negative port probability");
    total += sp.probability;
  }
  if (std::abs(total - 1.0) > 1e-9) fail("service port probabilities sum to " + std::to_string(total));
}

std::vector<FlowRecord> generate_synthetic_trace(const TraceConfig& cfg) {
  cfg.validate();
  return TraceBuilder(cfg).build();
}

}  // namespace nfcast
