#include <gtest/gtest.h>

#include <cmath>

#include "bimetric/metric.hpp"
#include "bimetric/synth.hpp"

namespace bimetric {
namespace {

SynthParams params(ProxyModel model, std::uint64_t seed) {
  SynthParams p;
  p.n = 300;
  p.queries = 30;
  p.dim = 5;
  p.C = 3.0;
  p.model = model;
  p.seed = seed;
  return p;
}

TEST(Synth, SandwichHoldsForCorpusAndQueries) {
  for (auto model : {ProxyModel::kLinear, ProxyModel::kWarped}) {
    for (auto weights : {AxisWeights::kUniform, AxisWeights::kBimodal}) {
      auto p = params(model, 3);
      p.weights = weights;
      const auto ds = generate_synthetic(p);
      ds.validate();
      const DistanceOracle d(MetricKind::kProxy, ds.corpus_proxy, ds.queries_proxy);
      const DistanceOracle D(MetricKind::kTruth, ds.corpus_truth, ds.queries_truth);
      const auto r = rescale_proxy_with_queries(d, D);
      EXPECT_GE(r.scale, 1.0 - 1e-5);
      EXPECT_LE(r.c_hat * r.scale, 3.0 * (1 + 1e-5));
      EXPECT_GT(r.c_hat, 1.5);
    }
  }
}

TEST(Synth, QrelsAreTrueTopTen) {
  const auto ds = generate_synthetic(params(ProxyModel::kLinear, 4));
  ASSERT_EQ(ds.qrels.size(), 30u);
  const DistanceOracle D(MetricKind::kTruth, ds.corpus_truth, ds.queries_truth);
  for (const auto& [q, docs] : ds.qrels) {
    EXPECT_EQ(docs.size(), 10u);
    double worst_in = 0.0, best_out = INFINITY;
    for (NodeId v = 0; v < 300; ++v) {
      const double dist = D.distance(Endpoint::query(q), v);
      if (docs.count(v)) {
        EXPECT_EQ(docs.at(v), 1);
        worst_in = std::max(worst_in, dist);
      } else {
        best_out = std::min(best_out, dist);
      }
    }
    EXPECT_LE(worst_in, best_out);
  }
}

TEST(Synth, SeedsAreDeterministicAndDistinct) {
  const auto a = generate_synthetic(params(ProxyModel::kWarped, 9));
  const auto b = generate_synthetic(params(ProxyModel::kWarped, 9));
  const auto c = generate_synthetic(params(ProxyModel::kWarped, 10));
  EXPECT_EQ(*a.corpus_proxy, *b.corpus_proxy);
  EXPECT_EQ(*a.queries_truth, *b.queries_truth);
  EXPECT_EQ(a.qrels, b.qrels);
  EXPECT_FALSE(*a.corpus_truth == *c.corpus_truth);
  EXPECT_EQ(a.corpus_proxy->dim(), 5u + 4u);
}

TEST(Synth, QueryShiftOnlyMovesQueryProxies) {
  auto p = params(ProxyModel::kLinear, 2);
  const auto base = generate_synthetic(p);
  p.query_shift = 0.3;
  const auto shifted = generate_synthetic(p);
  EXPECT_EQ(*base.corpus_proxy, *shifted.corpus_proxy);
  EXPECT_EQ(*base.queries_truth, *shifted.queries_truth);
  EXPECT_FALSE(*base.queries_proxy == *shifted.queries_proxy);
}

}  // namespace
}  // namespace bimetric
