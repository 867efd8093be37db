#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <fstream>
#include <sstream>

#include "bimetric/harness.hpp"
#include "bimetric/synth.hpp"
#include "test_util.hpp"

namespace bimetric {
namespace {

// Reference NDCG written from the textbook definition, independent of the
// library's loop structure.
double reference_ndcg(const std::vector<NodeId>& ranking, const std::map<std::uint32_t, int>& rel,
                      std::size_t k) {
  std::vector<double> gains;
  for (std::size_t i = 0; i < k && i < ranking.size(); ++i) {
    const auto it = rel.find(ranking[i]);
    gains.push_back(it == rel.end() ? 0.0 : std::pow(2.0, it->second) - 1.0);
  }
  std::vector<double> ideal;
  for (const auto& [doc, g] : rel) ideal.push_back(std::pow(2.0, g) - 1.0);
  std::sort(ideal.rbegin(), ideal.rend());
  auto dcg = [&](const std::vector<double>& g) {
    double s = 0.0;
    for (std::size_t i = 0; i < std::min(k, g.size()); ++i) s += g[i] / (std::log(i + 2.0) / std::log(2.0));
    return s;
  };
  const double idcg = dcg(ideal);
  return idcg > 0.0 ? dcg(gains) / idcg : 0.0;
}

TEST(Recall, Examples) {
  const std::vector<NodeId> truth{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  EXPECT_DOUBLE_EQ(recall_at_k(truth, truth, 10), 1.0);
  const std::vector<NodeId> disjoint{10, 11, 12, 13, 14, 15, 16, 17, 18, 19};
  EXPECT_DOUBLE_EQ(recall_at_k(disjoint, truth, 10), 0.0);
  const std::vector<NodeId> seven{9, 0, 8, 1, 7, 2, 6, 30, 31, 32};
  EXPECT_DOUBLE_EQ(recall_at_k(seven, truth, 10), 0.7);
  const std::vector<NodeId> repeated{0, 0, 0};
  EXPECT_DOUBLE_EQ(recall_at_k(repeated, truth, 10), 0.1);
  EXPECT_THROW(recall_at_k(truth, truth, 11), ParameterError);
}

TEST(Ndcg, Examples) {
  const std::map<std::uint32_t, int> one{{7, 1}};
  EXPECT_DOUBLE_EQ(ndcg_at_k(std::vector<NodeId>{7, 1, 2}, one, 10), 1.0);
  const std::vector<NodeId> second{3, 7, 1};
  EXPECT_NEAR(ndcg_at_k(second, one, 10), 0.6309, 1e-4);
  EXPECT_NEAR(ndcg_at_k(second, one, 10), 1.0 / std::log2(3.0), 1e-15);
  EXPECT_NEAR(reference_ndcg(second, one, 10), 0.6309, 1e-4);
  EXPECT_DOUBLE_EQ(ndcg_at_k(std::vector<NodeId>{1, 2}, one, 10), 0.0);
  EXPECT_DOUBLE_EQ(ndcg_at_k(std::vector<NodeId>{1, 2}, {}, 10), 0.0);
  EXPECT_DOUBLE_EQ(ndcg_at_k(std::vector<NodeId>{1, 2}, {{1, 0}}, 10), 0.0);
}

TEST(Ndcg, MatchesReferenceOnRandomGrades) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> doc(0, 30), grade(0, 3);
  for (int trial = 0; trial < 200; ++trial) {
    std::map<std::uint32_t, int> rel;
    for (int i = 0; i < 8; ++i) rel[doc(rng)] = grade(rng);
    std::vector<NodeId> ranking(31);
    std::iota(ranking.begin(), ranking.end(), 0);
    std::shuffle(ranking.begin(), ranking.end(), rng);
    for (std::size_t k : {1u, 5u, 10u}) {
      const double got = ndcg_at_k(ranking, rel, k);
      EXPECT_NEAR(got, reference_ndcg(ranking, rel, k), 1e-12);
      EXPECT_GE(got, 0.0);
      EXPECT_LE(got, 1.0 + 1e-12);
    }
  }
}

struct Fixture {
  BiMetricDataset dataset;
  ReachabilityGraph proxy_graph;
  ReachabilityGraph truth_graph;
  SearchContext context;
  GroundTruth truth;

  explicit Fixture(const SynthParams& params, std::uint32_t cap = 16) {
    dataset = generate_synthetic(params);
    context = SearchContext::for_dataset(dataset);
    GraphBuildOptions options;
    options.cap = cap;
    proxy_graph = build_alpha_graph(context.d, options);
    truth_graph = build_alpha_graph(context.D, options);
    context.proxy_graph = &proxy_graph;
    context.truth_graph = &truth_graph;
    truth = brute_force_truth(context.D, 10);
  }
};

SynthParams small(std::size_t n, std::size_t queries, std::uint64_t seed) {
  SynthParams p;
  p.n = n;
  p.queries = queries;
  p.dim = 4;
  p.C = 3.0;
  p.seed = seed;
  return p;
}

const MethodSpec kOurs{Method::kBimetricOurs};
const MethodSpec kBaseline{Method::kBimetricBaseline};
const MethodSpec kSingle{Method::kSingleMetric};

TEST(Harness, BaselineEqualsBruteForceRerank) {
  Fixture f(small(300, 15, 1));
  for (std::uint64_t Q : {10u, 25u, 80u, 300u}) {
    for (std::size_t beam : {std::size_t{300}, std::size_t{120}}) {
      f.context.stage1_beam = beam;
      const auto outcomes = run_method(f.context, kBaseline, Q);
      for (const auto& out : outcomes) {
        std::vector<Neighbor> by_d;
        for (NodeId v = 0; v < 300; ++v) by_d.push_back({v, f.context.d.distance(Endpoint::query(out.query), v)});
        std::sort(by_d.begin(), by_d.end());
        by_d.resize(Q);
        std::vector<Neighbor> reranked;
        for (const auto& c : by_d) reranked.push_back({c.id, f.context.D.distance(Endpoint::query(out.query), c.id)});
        std::sort(reranked.begin(), reranked.end());
        reranked.resize(10);
        std::vector<NodeId> expected;
        for (const auto& r : reranked) expected.push_back(r.id);
        if (beam >= 300) {
          EXPECT_EQ(out.top_k, expected) << "Q=" << Q << " q" << out.query;
        }
        EXPECT_EQ(out.calls_D, Q);
      }
    }
  }
}

TEST(Harness, SaturationAgreesWithBruteForce) {
  Fixture f(small(200, 12, 2));
  f.context.stage1_beam = 200;
  for (const auto& spec : {kOurs, kBaseline, kSingle}) {
    const auto outcomes = run_method(f.context, spec, 200);
    for (const auto& out : outcomes) {
      std::vector<NodeId> expected;
      for (const auto& nb : f.truth[out.query]) expected.push_back(nb.id);
      EXPECT_EQ(out.top_k, expected) << spec.label() << " q" << out.query;
      EXPECT_LE(out.calls_D, 200u);
    }
  }
}

TEST(Harness, SweepRowsAndBudgetCeiling) {
  Fixture f(small(100, 10, 3));
  f.context.stage1_beam = 100;
  const std::vector<MethodSpec> methods{kOurs, kBaseline, kSingle};
  const std::vector<std::uint64_t> budgets{50, 100};
  const std::vector<SweepInstance> instances{{"tiny", f.context, f.truth}};
  const auto result = sweep(instances, methods, budgets);
  ASSERT_EQ(result.rows.size(), 6u);
  for (const auto& row : result.rows) {
    EXPECT_LE(row.mean_calls_D, static_cast<double>(row.Q));
    EXPECT_LE(row.max_calls_D, row.Q);
    EXPECT_GE(row.recall_at_10, 0.0);
    EXPECT_LE(row.recall_at_10, 1.0);
  }
  // at Q = n every method has the brute-force answer
  for (const auto& row : result.rows) {
    if (row.Q == 100) {
      EXPECT_DOUBLE_EQ(row.recall_at_10, 1.0) << row.method;
    }
  }
  const std::vector<std::uint64_t> descending{100, 50};
  EXPECT_THROW(sweep(instances, methods, descending), ParameterError);
  EXPECT_THROW(run_method(f.context, kOurs, 5), ParameterError);
}

TEST(Harness, BudgetMutationIsCaught) {
  Fixture f(small(150, 10, 4));
  f.context.policy = BudgetPolicy::kRecordOnly;
  bool exceeded = false;
  for (const auto& spec : {kOurs, kSingle}) {
    for (const auto& out : run_method(f.context, spec, 20)) exceeded |= out.calls_D > 20;
  }
  EXPECT_TRUE(exceeded) << "without the budget check some query must overspend";
}

TEST(Harness, CsvIsDeterministic) {
  auto run = [] {
    Fixture f(small(120, 8, 5));
    f.context.threads = 3;
    const std::vector<MethodSpec> methods{kOurs, kBaseline};
    const std::vector<std::uint64_t> budgets{20, 40};
    const std::vector<SweepInstance> instances{{"det", f.context, f.truth}};
    SweepOptions options;
    options.record_wall_clock = false;
    std::ostringstream out;
    sweep(instances, methods, budgets, options).write_csv(out);
    return out.str();
  };
  const auto a = run();
  EXPECT_EQ(a, run());
  EXPECT_EQ(a.substr(0, a.find('\n')), SweepResult::kCsvHeader);
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 5);
}

TEST(Harness, CsvFormatting) {
  SweepResult result;
  SweepRow row;
  row.dataset = "ds";
  row.method = "bimetric-ours[top-1]";
  row.start_mode = "top-1";
  row.Q = 100;
  row.ndcg_at_10 = 0.5;
  row.recall_at_10 = 1.0 / 3.0;
  row.mean_calls_D = 99.5;
  row.mean_calls_d = 5000;
  row.wall_seconds = 0.01234;
  result.rows.push_back(row);
  std::ostringstream plain, ablation;
  result.write_csv(plain);
  result.write_csv(ablation, true);
  EXPECT_EQ(plain.str(), std::string(SweepResult::kCsvHeader) +
                             "\nds,bimetric-ours[top-1],100,0.500000,0.333333,99.500,5000.000,0.012\n");
  EXPECT_EQ(ablation.str(), std::string(SweepResult::kCsvHeader) +
                                ",start_mode\nds,bimetric-ours[top-1],100,0.500000,0.333333,99.500,5000.000,0.012,top-1\n");
}

TEST(Harness, MethodNames) {
  for (auto m : {Method::kBimetricOurs, Method::kBimetricBaseline, Method::kSingleMetric}) {
    EXPECT_EQ(parse_method(to_string(m)), m);
  }
  EXPECT_THROW(parse_method("oracle"), ParameterError);
  MethodSpec fixed{Method::kBimetricOurs, StartMode::kFixed, 100};
  EXPECT_EQ(fixed.label(), "bimetric-ours[top-100]");
  EXPECT_EQ(kOurs.label(), "bimetric-ours");
}

TEST(GroundTruth, FileRoundTripAndCache) {
  Fixture f(small(80, 6, 6));
  testing::TempDir dir;
  save_truth(dir / "t.bmgt", f.truth);
  EXPECT_EQ(load_truth(dir / "t.bmgt"), f.truth);
  const auto cached = cached_truth(f.dataset, 10, dir.path());
  EXPECT_EQ(cached, f.truth);
  std::size_t files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir.path())) {
    files += entry.path().filename().string().rfind("truth-", 0) == 0;
  }
  EXPECT_EQ(files, 1u);
  EXPECT_EQ(cached_truth(f.dataset, 10, dir.path()), f.truth);
  std::ofstream(dir / "bad.bmgt") << "nope";
  EXPECT_THROW(load_truth(dir / "bad.bmgt"), FormatError);
}

// Screens small random instances for a query whose D-nearest neighbor sits
// below position Q in the proxy ranking yet is one hop from a proxy-top start.
TEST(Harness, PlantedInstance) {
  bool found = false;
  for (std::uint64_t seed = 0; seed < 200 && !found; ++seed) {
    SynthParams p = small(60, 20, 1000 + seed);
    p.dim = 2;
    p.model = ProxyModel::kWarped;
    p.warp_features = 2;
    p.warp_frequency = 6.0;
    Fixture f(p, 8);
    f.context.stage1_beam = 60;
    const std::uint64_t Q = 6;
    const MethodSpec ours{Method::kBimetricOurs, StartMode::kHalfBudget, 100, 1};
    const MethodSpec base{Method::kBimetricBaseline, StartMode::kHalfBudget, 100, 1};
    const auto a = run_method(f.context, ours, Q);
    const auto b = run_method(f.context, base, Q);
    for (std::size_t i = 0; i < a.size() && !found; ++i) {
      const std::uint32_t q = a[i].query;
      const NodeId best = f.truth[q][0].id;
      std::vector<Neighbor> by_d;
      for (NodeId v = 0; v < 60; ++v) by_d.push_back({v, f.context.d.distance(Endpoint::query(q), v)});
      std::sort(by_d.begin(), by_d.end());
      const auto rank = std::find_if(by_d.begin(), by_d.end(), [&](auto& nb) { return nb.id == best; }) - by_d.begin();
      bool adjacent = false;
      for (std::size_t s = 0; s < Q / 2; ++s) {
        const auto nb = f.proxy_graph.neighbors(by_d[s].id);
        adjacent |= std::binary_search(nb.begin(), nb.end(), best);
      }
      if (rank >= static_cast<long>(Q) && adjacent && a[i].top_k == std::vector<NodeId>{best}) {
        found = true;
        EXPECT_DOUBLE_EQ(recall_at_k(a[i].top_k, std::vector<NodeId>{best}, 1), 1.0);
        EXPECT_DOUBLE_EQ(recall_at_k(b[i].top_k, std::vector<NodeId>{best}, 1), 0.0);
      }
    }
  }
  EXPECT_TRUE(found);
}

}  // namespace
}  // namespace bimetric
