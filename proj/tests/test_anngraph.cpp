#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "bimetric/anngraph.hpp"
#include "test_util.hpp"
#include "theory_instance.hpp"

namespace bimetric {
namespace {

using testing::line;

ReachabilityGraph uncapped(const DistanceOracle& d, double alpha) {
  GraphBuildOptions options;
  options.alpha = alpha;
  options.cap = std::nullopt;
  return build_alpha_graph(d, options);
}

TEST(BuildGraph, TwoNodes) {
  const auto g = uncapped(DistanceOracle(MetricKind::kProxy, line({0, 5})), 1.5);
  EXPECT_EQ(g.adjacency, (std::vector<std::vector<NodeId>>{{1}, {0}}));
}

TEST(BuildGraph, ThreePointLine) {
  const DistanceOracle d(MetricKind::kProxy, line({0, 1, 2}));
  const auto g = uncapped(d, 2.0);
  EXPECT_EQ(g.adjacency, (std::vector<std::vector<NodeId>>{{1}, {0, 2}, {1}}));
  EXPECT_EQ(g.start_node, 1u);
  EXPECT_TRUE(verify_shortcut_reachability(g, d, 2.0).ok);
}

TEST(BuildGraph, PaperDefaults) {
  const GraphBuildOptions options;
  EXPECT_DOUBLE_EQ(options.alpha, 1.2);
  ASSERT_TRUE(options.cap.has_value());
  EXPECT_EQ(*options.cap, 64u);
  EXPECT_EQ(default_stage1_beam(1'000'000), 5000u);
  EXPECT_EQ(default_stage1_beam(1'000'001), 30000u);
}

TEST(BuildGraph, RejectsBadParameters) {
  const DistanceOracle d(MetricKind::kProxy, line({0, 1}));
  GraphBuildOptions options;
  options.alpha = 1.0;
  EXPECT_THROW(build_alpha_graph(d, options), ParameterError);
  options.alpha = 1.2;
  options.cap = 0;
  EXPECT_THROW(build_alpha_graph(d, options), ParameterError);
}

TEST(BuildGraph, CapBoundsDegreeAndListsAreClean) {
  std::mt19937_64 rng(3);
  const DistanceOracle d(MetricKind::kProxy, testing::random_set(300, 8, rng));
  GraphBuildOptions options;
  options.cap = 5;
  const auto g = build_alpha_graph(d, options);
  EXPECT_LE(g.max_degree(), 5u);
  for (NodeId v = 0; v < g.n; ++v) {
    const auto& nb = g.adjacency[v];
    EXPECT_TRUE(std::is_sorted(nb.begin(), nb.end()));
    EXPECT_EQ(std::adjacent_find(nb.begin(), nb.end()), nb.end());
    EXPECT_EQ(std::count(nb.begin(), nb.end(), v), 0);
  }
}

TEST(BuildGraph, ThreadCountDoesNotChangeGraph) {
  std::mt19937_64 rng(5);
  const DistanceOracle d(MetricKind::kProxy, testing::random_set(400, 4, rng));
  GraphBuildOptions one, four;
  four.threads = 4;
  EXPECT_EQ(build_alpha_graph(d, one), build_alpha_graph(d, four));
}

TEST(BuildGraph, DuplicatesLinkedAndReachable) {
  const DistanceOracle d(MetricKind::kProxy, line({0, 3, 3, 1, 3}));
  const auto g = uncapped(d, 1.5);
  EXPECT_TRUE(verify_shortcut_reachability(g, d, 1.5).ok);
  for (NodeId a : {1u, 2u, 4u}) {
    for (NodeId b : {1u, 2u, 4u}) {
      if (a != b) {
        EXPECT_TRUE(std::binary_search(g.adjacency[a].begin(), g.adjacency[a].end(), b)) << a << "->" << b;
      }
    }
  }
}

TEST(Reachability, CompleteGraphAlwaysPasses) {
  std::mt19937_64 rng(1);
  const DistanceOracle d(MetricKind::kProxy, testing::random_set(30, 3, rng));
  ReachabilityGraph g;
  g.n = 30;
  g.adjacency.resize(30);
  for (NodeId a = 0; a < 30; ++a) {
    for (NodeId b = 0; b < 30; ++b) {
      if (a != b) g.adjacency[a].push_back(b);
    }
  }
  for (double alpha : {1.0, 2.0, 100.0}) EXPECT_TRUE(verify_shortcut_reachability(g, d, alpha).ok);
}

TEST(Reachability, DeletedEdgeGivesCounterexample) {
  const DistanceOracle d(MetricKind::kProxy, line({0, 1, 2}));
  auto g = uncapped(d, 2.0);
  g.adjacency[1] = {2};
  const auto check = verify_shortcut_reachability(g, d, 2.0);
  ASSERT_FALSE(check.ok);
  EXPECT_EQ(check.counterexample, std::make_pair(NodeId{1}, NodeId{0}));
}

TEST(Reachability, RandomBuildsAreAlphaReachable) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    const DistanceOracle d(MetricKind::kProxy, testing::random_set(120, 3, rng));
    EXPECT_TRUE(verify_shortcut_reachability(uncapped(d, 1.3), d, 1.3).ok);
  }
}

// Lemma: alpha-reachable under d implies alpha/C-reachable under D.
TEST(Reachability, TransfersAcrossMetrics) {
  for (std::uint64_t seed = 0; seed < 9; ++seed) {
    const double C = (seed % 3 == 0) ? 1.5 : (seed % 3 == 1 ? 2.0 : 3.0);
    const auto inst = testing::theory_instance(150, 0, C, 100 + seed);
    ASSERT_LE(inst.C, C * (1 + 1e-6)) << inst.kind;
    const double alpha0 = 1.5;
    const auto g = uncapped(inst.d, inst.C * alpha0);
    const auto check = verify_shortcut_reachability(g, inst.D, alpha0);
    EXPECT_TRUE(check.ok) << inst.kind << " seed " << seed;
  }
}

TEST(Greedy, QueryOnCorpusPoint) {
  const DistanceOracle D(MetricKind::kTruth, line({0, 1, 2, 5}), line({2}));
  const auto g = uncapped(D, 2.0);
  CountingOracle oracle(D);
  const NodeId start = 2;
  const auto trace = greedy_search(g, oracle, Endpoint::query(0), std::span(&start, 1), 1);
  ASSERT_FALSE(trace.visited.empty());
  EXPECT_EQ(trace.visited[0].id, 2u);
  EXPECT_EQ(trace.visited[0].distance, 0.0);
}

TEST(Greedy, ThreePointLineTrace) {
  const DistanceOracle D(MetricKind::kTruth, line({0, 1, 2}), line({2.1f}));
  const auto g = uncapped(DistanceOracle(MetricKind::kProxy, line({0, 1, 2})), 2.0);
  CountingOracle oracle(D);
  const NodeId start = 0;
  const auto trace = greedy_search(g, oracle, Endpoint::query(0), std::span(&start, 1), 1);
  EXPECT_EQ(trace.visit_order, (std::vector<NodeId>{0, 1, 2}));
  EXPECT_EQ(trace.visited.front().id, 2u);
  EXPECT_EQ(trace.calls_D, 3u);
  EXPECT_EQ(trace.terminated_by, Termination::kFrontierExhausted);
}

TEST(Greedy, BudgetStopsGracefully) {
  std::mt19937_64 rng(2);
  const DistanceOracle D(MetricKind::kTruth, testing::random_set(200, 3, rng),
                         testing::random_set(1, 3, rng));
  const auto g = uncapped(D, 1.2);
  CountingOptions options;
  options.budget = 17;
  CountingOracle oracle(D, options);
  const NodeId start = g.start_node;
  const auto trace = greedy_search(g, oracle, Endpoint::query(0), std::span(&start, 1), 50);
  EXPECT_EQ(trace.terminated_by, Termination::kBudget);
  EXPECT_EQ(trace.calls_D, 17u);
  EXPECT_EQ(trace.seen.size(), 17u);
  EXPECT_TRUE(std::is_sorted(trace.seen.begin(), trace.seen.end()));
}

TEST(Greedy, RejectsBadArguments) {
  const DistanceOracle D(MetricKind::kTruth, line({0, 1}));
  const auto g = uncapped(D, 2.0);
  CountingOracle oracle(D);
  const NodeId bad = 7, ok = 0;
  EXPECT_THROW(greedy_search(g, oracle, Endpoint::corpus(0), {}, 1), ParameterError);
  EXPECT_THROW(greedy_search(g, oracle, Endpoint::corpus(0), std::span(&ok, 1), 0), ParameterError);
  EXPECT_THROW(greedy_search(g, oracle, Endpoint::corpus(0), std::span(&bad, 1), 1), std::out_of_range);
}

// Main theorem: beam-1 greedy under D on a graph built at alpha = C (1 + 2/eps)
// under d returns a (1 + eps)-approximate nearest neighbor.
TEST(Greedy, BiMetricApproximationGuarantee) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const double eps = seed % 2 == 0 ? 0.5 : 0.2;
    const auto inst = testing::theory_instance(200, 40, 2.0, 300 + seed);
    const auto g = uncapped(inst.d, inst.C * (1 + 2 / eps));
    for (std::uint32_t q = 0; q < 40; ++q) {
      CountingOracle oracle(inst.D);
      const NodeId start = static_cast<NodeId>((q * 37) % 200);
      const auto trace = greedy_search(g, oracle, Endpoint::query(q), std::span(&start, 1), 1);
      double best = INFINITY;
      for (NodeId v = 0; v < 200; ++v) best = std::min(best, inst.D.distance(Endpoint::query(q), v));
      EXPECT_LE(trace.visited.front().distance, (1 + eps) * best) << inst.kind << " q" << q;
    }
  }
}

TEST(FirstStage, BruteForceWhenBeamCoversCorpus) {
  std::mt19937_64 rng(6);
  const DistanceOracle d(MetricKind::kProxy, testing::random_set(300, 4, rng),
                         testing::random_set(5, 4, rng));
  GraphBuildOptions options;
  options.cap = 8;
  const auto g = build_alpha_graph(d, options);
  for (std::uint32_t q = 0; q < 5; ++q) {
    CountingOracle oracle(d);
    const auto got = first_stage_candidates(g, oracle, Endpoint::query(q), 20, 300);
    std::vector<Neighbor> all;
    for (NodeId v = 0; v < 300; ++v) all.push_back({v, d.distance(Endpoint::query(q), v)});
    std::sort(all.begin(), all.end());
    all.resize(20);
    EXPECT_EQ(got, all);
  }
}

TEST(TwoStage, StartCounts) {
  TwoStageParams p;
  p.budget = 101;
  EXPECT_EQ(start_count(p), 50u);
  p.budget = 1;
  EXPECT_EQ(start_count(p), 1u);
  p.budget = 400;
  p.start_mode = StartMode::kFixed;
  p.fixed_starts = 100;
  EXPECT_EQ(start_count(p), 100u);
  p.budget = 60;
  EXPECT_EQ(start_count(p), 60u);
  p.start_mode = StartMode::kDefaultEntry;
  EXPECT_EQ(start_count(p), 1u);
  for (auto mode : {StartMode::kHalfBudget, StartMode::kFixed, StartMode::kDefaultEntry}) {
    EXPECT_EQ(parse_start_mode(to_string(mode)), mode);
  }
  EXPECT_THROW(parse_start_mode("sideways"), ParameterError);
}

TEST(TwoStage, FullBudgetMatchesBruteForce) {
  std::mt19937_64 rng(12);
  const auto inst = testing::theory_instance(250, 10, 3.0, 12);
  GraphBuildOptions options;
  options.cap = 16;
  const auto g = build_alpha_graph(inst.d, options);
  for (auto mode : {StartMode::kHalfBudget, StartMode::kFixed, StartMode::kDefaultEntry}) {
    for (std::uint32_t q = 0; q < 10; ++q) {
      CountingOptions co;
      co.budget = 250;
      co.memoize = true;
      CountingOracle D(inst.D, co);
      TwoStageParams p;
      p.budget = 250;
      p.k = 10;
      p.start_mode = mode;
      p.stage1_beam = 250;
      const auto result = two_stage_search(g, inst.d, D, Endpoint::query(q), p);
      std::vector<Neighbor> all;
      for (NodeId v = 0; v < 250; ++v) all.push_back({v, inst.D.distance(Endpoint::query(q), v)});
      std::sort(all.begin(), all.end());
      all.resize(10);
      EXPECT_EQ(result.top_k, all) << to_string(mode) << " q" << q;
      EXPECT_LE(D.calls(), 250u);
    }
  }
}

TEST(Bmag, RoundTripAndLayout) {
  const auto g = uncapped(DistanceOracle(MetricKind::kProxy, line({0, 1, 2})), 2.0);
  const auto bytes = serialize_graph(g);
  // magic, version, n, alpha, cap, start, then 3 nodes with 1 + 2 + 1 edges
  EXPECT_EQ(bytes.size(), 4u + 4 + 4 + 8 + 4 + 4 + 3 * 4 + 4 * 4);
  EXPECT_EQ(std::string(reinterpret_cast<const char*>(bytes.data()), 4), "BMAG");
  EXPECT_EQ(parse_graph(bytes), g);

  testing::TempDir dir;
  std::mt19937_64 rng(1);
  GraphBuildOptions options;
  options.cap = 6;
  const auto big = build_alpha_graph(DistanceOracle(MetricKind::kProxy, testing::random_set(90, 3, rng)), options);
  save_graph(dir / "g.bmag", big);
  EXPECT_EQ(load_graph(dir / "g.bmag"), big);
}

TEST(Bmag, CorruptInputs) {
  const auto g = uncapped(DistanceOracle(MetricKind::kProxy, line({0, 1, 2})), 2.0);
  auto bytes = serialize_graph(g);
  auto bad_magic = bytes;
  bad_magic[0] = std::byte{'X'};
  EXPECT_THROW(parse_graph(bad_magic), FormatError);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(parse_graph(truncated), FormatError);
  auto trailing = bytes;
  trailing.push_back(std::byte{0});
  EXPECT_THROW(parse_graph(trailing), FormatError);
  auto bad_neighbor = bytes;
  bad_neighbor[bad_neighbor.size() - 4] = std::byte{9};
  EXPECT_THROW(parse_graph(bad_neighbor), FormatError);
}

}  // namespace
}  // namespace bimetric
