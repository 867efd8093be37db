#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "bimetric/covertree.hpp"
#include "bimetric/dataset.hpp"
#include "bimetric/metric.hpp"
#include "bimetric/seed.hpp"
#include "json.hpp"

namespace bimetric {

std::string DatasetStats::to_json() const {
  nlohmann::json j = {{"n", n},
                      {"delta_d", delta_d},
                      {"lambda_d_estimate", lambda_d_estimate},
                      {"c_hat", c_hat},
                      {"exact", exact}};
  return j.dump();
}

namespace {

// Largest log2(|greedy r-cover of B(p, 2r)|) over the sampled centers and a
// geometric ladder of radii.
double estimate_doubling_dimension(const EmbeddingSet& points, double min_dist, double max_dist,
                                   std::size_t centers, std::uint64_t seed) {
  const std::size_t n = points.count();
  auto share = std::make_shared<const EmbeddingSet>(points);
  const DistanceOracle d(MetricKind::kProxy, share);

  std::vector<NodeId> center_ids(n);
  std::iota(center_ids.begin(), center_ids.end(), 0);
  if (centers < n) {
    std::mt19937_64 rng(child_seed(seed, "packing-centers"));
    std::shuffle(center_ids.begin(), center_ids.end(), rng);
    center_ids.resize(centers);
    std::sort(center_ids.begin(), center_ids.end());
  }

  double best = 0.0;
  std::vector<double> dist(n);
  std::vector<NodeId> ball;
  for (NodeId p : center_ids) {
    for (NodeId q = 0; q < n; ++q) dist[q] = d.between(p, q);
    for (double r = max_dist / 2.0; r >= min_dist / 2.0; r /= 2.0) {
      ball.clear();
      for (NodeId q = 0; q < n; ++q) {
        if (dist[q] <= 2.0 * r) ball.push_back(q);
      }
      const auto cover = build_cover(d, ball, r);
      best = std::max(best, std::log2(static_cast<double>(cover.size())));
    }
  }
  return best;
}

}  // namespace

DatasetStats compute_stats(const EmbeddingSet& points, const StatsOptions& options,
                           const EmbeddingSet* truth) {
  const std::size_t n = points.count();
  if (n < 2) throw ParameterError("compute_stats needs at least two points");
  if (truth != nullptr && truth->count() != n) {
    throw ParameterError("truth set size differs from proxy set size");
  }

  DatasetStats stats;
  stats.n = n;
  stats.exact = n <= options.exact_threshold;
  const auto pairs = select_pairs(n, stats.exact ? PairSelection::exhaustive()
                                                 : PairSelection::sampled(options.sample_pairs,
                                                                          child_seed(options.seed, "stats-pairs")));

  double max_dist = 0.0;
  double min_dist = std::numeric_limits<double>::infinity();
  double min_ratio = std::numeric_limits<double>::infinity();
  double max_ratio = 0.0;
  for (const auto& [a, b] : pairs) {
    const double dist = euclidean(points[a], points[b]);
    max_dist = std::max(max_dist, dist);
    if (dist > 0.0) min_dist = std::min(min_dist, dist);
    if (truth != nullptr) {
      const double D = euclidean((*truth)[a], (*truth)[b]);
      if (dist > 0.0) {
        const double ratio = D / dist;
        if (D > 0.0) min_ratio = std::min(min_ratio, ratio);
        max_ratio = std::max(max_ratio, ratio);
      } else if (D > 0.0) {
        max_ratio = std::numeric_limits<double>::infinity();
      }
    }
  }
  if (max_dist == 0.0) throw StatsError("zero diameter");

  stats.delta_d = max_dist / min_dist;
  stats.lambda_d_estimate =
      estimate_doubling_dimension(points, min_dist, max_dist, options.packing_centers, options.seed);
  if (truth != nullptr && std::isfinite(min_ratio)) {
    stats.c_hat = std::max(1.0, max_ratio / min_ratio);
  } else if (truth != nullptr && !std::isfinite(max_ratio)) {
    stats.c_hat = std::numeric_limits<double>::infinity();
  }
  return stats;
}

}  // namespace bimetric
