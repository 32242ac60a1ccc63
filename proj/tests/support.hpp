#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "nfcast/autodiff.hpp"
#include "nfcast/flow.hpp"
#include "nfcast/graph.hpp"
#include "nfcast/model.hpp"
#include "nfcast/nn.hpp"
#include "nfcast/preprocess.hpp"
#include "nfcast/rng.hpp"

namespace nfcast::testing {

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;
};

// Central differences over every entry of every listed tensor, against the
// gradient from one backward pass. Entries whose analytic and numeric values
// are both below `floor` compare on absolute difference scaled by `floor`.
inline GradCheck grad_check(const std::vector<std::pair<std::string, ad::Tensor>>& params,
                            const std::function<ad::Tensor()>& loss_fn, double h = 1e-6, double floor = 1e-4) {
  for (auto [name, p] : params) p.zero_grad();
  ad::backward(loss_fn());
  std::vector<std::vector<double>> analytic;
  for (const auto& [name, p] : params) {
    auto g = p.grad();
    if (g.empty()) g.assign(p.numel(), 0.0);
    analytic.push_back(std::move(g));
  }
  GradCheck out;
  for (std::size_t k = 0; k < params.size(); ++k) {
    ad::Tensor p = params[k].second;
    auto values = p.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = loss_fn().item();
      values[i] = saved - h;
      const double down = loss_fn().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[k][i];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++out.checked;
      if (err > out.max_rel_error) {
        out.max_rel_error = err;
        out.worst = params[k].first + "[" + std::to_string(i) + "] analytic " + std::to_string(a) + " numeric " +
                    std::to_string(numeric);
      }
    }
  }
  for (auto [name, p] : params) p.zero_grad();
  return out;
}

inline std::vector<std::pair<std::string, ad::Tensor>> all_parameters(const nn::ParameterStore& store) {
  std::vector<std::pair<std::string, ad::Tensor>> out;
  for (const auto& e : store.entries()) out.emplace_back(e.name, e.tensor);
  return out;
}

inline ad::Tensor random_tensor(ad::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                                bool requires_grad = true) {
  std::vector<double> v(shape.numel());
  for (auto& x : v) x = rng.uniform(lo, hi);
  return ad::Tensor::from(shape, std::move(v), requires_grad);
}

inline FlowRecord flow(Ipv4 src, Ipv4 dst, std::uint16_t sport, std::uint16_t dport, std::uint8_t proto,
                       std::int64_t t, std::vector<double> numerics = {1.0, 2.0, 3.0, 4.0, 5.0}) {
  FlowRecord r;
  r.src_ip = src;
  r.dst_ip = dst;
  r.src_port = sport;
  r.dst_port = dport;
  r.protocol = proto;
  r.start_time_us = t;
  r.numerics = std::move(numerics);
  return r;
}

// A window of n flows over a handful of hosts with varied ports and numerics.
inline Window toy_window(std::size_t n, std::uint64_t seed, std::size_t index = 0) {
  Rng rng(seed);
  static constexpr std::uint16_t kPorts[] = {0, 53, 123, 443, 80, 8080, 51000};
  Window w;
  w.window_index = index;
  for (std::size_t i = 0; i < n; ++i) {
    const Ipv4 src{10, 0, 0, static_cast<std::uint8_t>(1 + rng.uniform_int(4))};
    const Ipv4 dst{10, 0, 1, static_cast<std::uint8_t>(1 + rng.uniform_int(4))};
    const auto dport = kPorts[rng.uniform_int(7)];
    const std::uint8_t proto = dport == 0 ? 1 : (dport == 53 || dport == 123) ? 17 : 6;
    std::vector<double> nums(5);
    for (auto& x : nums) x = rng.uniform(0.5, 100.0);
    w.records.push_back(flow(src, dst, static_cast<std::uint16_t>(50000 + rng.uniform_int(10000)), dport, proto,
                             static_cast<std::int64_t>(i), nums));
  }
  return w;
}

inline IpVocabulary vocab_of(std::initializer_list<const Window*> windows) {
  std::vector<Window> ws;
  for (const auto* w : windows) ws.push_back(*w);
  return build_ip_vocabulary(ws);
}

struct ToyExample {
  ForecastExample example;
  std::size_t n_ip_classes = 0;
};

inline ToyExample toy_example(std::size_t n, std::uint64_t seed) {
  auto cur = std::make_shared<const Window>(toy_window(n, seed, 0));
  auto nxt = std::make_shared<const Window>(toy_window(n, seed + 1, 1));
  const auto vocab = vocab_of({cur.get(), nxt.get()});
  auto g0 = std::make_shared<const WindowGraph>(build_graph(*cur, vocab));
  auto g1 = std::make_shared<const WindowGraph>(build_graph(*nxt, vocab));
  return {make_example(cur, g0, g1), vocab.size()};
}

}  // namespace nfcast::testing
