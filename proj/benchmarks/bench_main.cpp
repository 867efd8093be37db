#include <benchmark/benchmark.h>

#include <map>
#include <memory>

#include "bimetric/anngraph.hpp"
#include "bimetric/covertree.hpp"
#include "bimetric/synth.hpp"

namespace bimetric {
namespace {

const BiMetricDataset& dataset(std::size_t n) {
  static std::map<std::size_t, BiMetricDataset> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    it = cache.emplace(n, generate_synthetic({.name = "bench", .n = n, .queries = 64, .dim = 8,
                                              .C = 3.0, .seed = 1}))
             .first;
  }
  return it->second;
}

DistanceOracle proxy(const BiMetricDataset& ds) {
  return DistanceOracle(MetricKind::kProxy, ds.corpus_proxy, ds.queries_proxy);
}

DistanceOracle truth(const BiMetricDataset& ds) {
  return DistanceOracle(MetricKind::kTruth, ds.corpus_truth, ds.queries_truth);
}

const ReachabilityGraph& graph(std::size_t n) {
  static std::map<std::size_t, ReachabilityGraph> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, build_alpha_graph(proxy(dataset(n)), {})).first;
  return it->second;
}

void BM_BuildGraph(benchmark::State& state) {
  const auto& ds = dataset(state.range(0));
  const auto d = proxy(ds);
  for (auto _ : state) benchmark::DoNotOptimize(build_alpha_graph(d, {}));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BuildGraph)->Arg(500)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond)->Complexity();

void BM_GreedySearch(benchmark::State& state) {
  const std::size_t n = 2000;
  const auto& g = graph(n);
  const auto D = truth(dataset(n));
  const NodeId start[] = {g.start_node};
  std::uint32_t q = 0;
  for (auto _ : state) {
    CountingOracle oracle(D);
    benchmark::DoNotOptimize(greedy_search(g, oracle, Endpoint::query(q++ % 64), start, state.range(0)));
  }
}
BENCHMARK(BM_GreedySearch)->Arg(1)->Arg(16)->Arg(64);

void BM_TwoStage(benchmark::State& state) {
  const std::size_t n = 2000;
  const auto& g = graph(n);
  const auto d = proxy(dataset(n));
  const auto D = truth(dataset(n));
  const TwoStageParams params{.budget = static_cast<std::uint64_t>(state.range(0)), .k = 10};
  std::uint32_t q = 0;
  for (auto _ : state) {
    CountingOracle oracle(D, {.budget = params.budget});
    benchmark::DoNotOptimize(two_stage_search(g, d, oracle, Endpoint::query(q++ % 64), params));
  }
}
BENCHMARK(BM_TwoStage)->Arg(100)->Arg(400)->Arg(1600)->Unit(benchmark::kMicrosecond);

void BM_BuildCoverTree(benchmark::State& state) {
  const auto d = proxy(dataset(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_cover_tree(d, {.T = 3.0}));
}
BENCHMARK(BM_BuildCoverTree)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_CoverSearch(benchmark::State& state) {
  const std::size_t n = 2000;
  const auto tree = build_cover_tree(proxy(dataset(n)), {.T = 3.0});
  const auto D = truth(dataset(n));
  const double eps = 1.0 / static_cast<double>(state.range(0));
  std::uint32_t q = 0;
  for (auto _ : state) {
    CountingOracle oracle(D);
    benchmark::DoNotOptimize(cover_tree_search(tree, oracle, Endpoint::query(q++ % 64), eps));
  }
}
BENCHMARK(BM_CoverSearch)->Arg(2)->Arg(10);

}  // namespace
}  // namespace bimetric

BENCHMARK_MAIN();
