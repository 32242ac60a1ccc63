#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "nfcast/baseline.hpp"
#include "nfcast/flow.hpp"
#include "nfcast/gnn.hpp"
#include "nfcast/graph.hpp"
#include "nfcast/metrics.hpp"
#include "nfcast/preprocess.hpp"
#include "nfcast/rng.hpp"

namespace {

using namespace nfcast;

struct Fixture {
  std::vector<Window> windows;
  IpVocabulary vocab;
  ForecastExample example;

  explicit Fixture(std::size_t length) {
    TraceConfig t;
    t.n_flows = length * 2;
    t.seed = 17;
    const auto flows = generate_synthetic_trace(t);
    windows = make_windows(flows, length, length);
    vocab = build_ip_vocabulary(windows);
    auto cur = std::make_shared<const Window>(windows[0]);
    auto g0 = std::make_shared<const WindowGraph>(build_graph(windows[0], vocab));
    auto g1 = std::make_shared<const WindowGraph>(build_graph(windows[1], vocab));
    example = make_example(cur, g0, g1);
  }
};

const Fixture& fixture(std::size_t length) {
  static const Fixture f64(64);
  static const Fixture f512(512);
  return length == 64 ? f64 : f512;
}

void BM_BuildGraph(benchmark::State& state) {
  const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_graph(f.windows[0], f.vocab));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BuildGraph)->Arg(64)->Arg(512);

void BM_SerializeRoundTrip(benchmark::State& state) {
  const auto g = build_graph(fixture(512).windows[0], fixture(512).vocab);
  for (auto _ : state) benchmark::DoNotOptimize(deserialize_graph(serialize_graph(g)));
}
BENCHMARK(BM_SerializeRoundTrip);

GnnModel make_gnn(const Fixture& f) {
  GnnDims dims;
  dims.n_ip_classes = f.vocab.size();
  return GnnModel(dims, GnnHyper{}, 1);
}

void BM_GnnForecast(benchmark::State& state) {
  const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
  const auto model = make_gnn(f);
  for (auto _ : state) benchmark::DoNotOptimize(model.forecast(f.example));
}
BENCHMARK(BM_GnnForecast)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_GnnTrainingStep(benchmark::State& state) {
  const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
  auto model = make_gnn(f);
  Rng rng(3);
  for (auto _ : state) {
    model.parameters().zero_grad();
    ad::backward(model.training_loss(f.example, rng));
  }
}
BENCHMARK(BM_GnnTrainingStep)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_BaselineForecast(benchmark::State& state) {
  const auto& f = fixture(512);
  BaselineHyper h;
  h.backbone = state.range(0) == 0 ? BackboneKind::DLinear : BackboneKind::Lstm;
  BaselineDims dims;
  dims.n_ip_classes = f.vocab.size();
  const BaselineModel model(dims, h, 1);
  for (auto _ : state) benchmark::DoNotOptimize(model.forecast(f.example));
}
BENCHMARK(BM_BaselineForecast)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_MacroAuroc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  constexpr std::size_t kClasses = 16;
  Rng rng(5);
  Matrix scores(n, kClasses);
  for (auto& x : scores.data) x = rng.uniform(0.0, 1.0);
  std::vector<std::uint32_t> targets(n);
  for (auto& t : targets) t = static_cast<std::uint32_t>(rng.uniform_int(kClasses));
  for (auto _ : state) benchmark::DoNotOptimize(macro_auroc(scores, targets));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MacroAuroc)->Arg(512)->Arg(8192);

}  // namespace

BENCHMARK_MAIN();
