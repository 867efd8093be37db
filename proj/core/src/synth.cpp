#include "bimetric/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "bimetric/metric.hpp"
#include "bimetric/seed.hpp"

namespace bimetric {

namespace {

using Matrix = std::vector<std::vector<double>>;

std::vector<double> uniform_in_ball(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit;
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : v) {
      x = normal(rng);
      norm += x * x;
    }
  } while (norm == 0.0);
  const double radius = std::pow(unit(rng), 1.0 / static_cast<double>(dim)) / std::sqrt(norm);
  for (double& x : v) x *= radius;
  return v;
}

// Random orthogonal matrix by Gram-Schmidt on Gaussian rows.
Matrix random_rotation(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix rows(dim, std::vector<double>(dim));
  for (std::size_t i = 0; i < dim; ++i) {
    for (;;) {
      for (double& x : rows[i]) x = normal(rng);
      for (std::size_t j = 0; j < i; ++j) {
        const double dot = std::inner_product(rows[i].begin(), rows[i].end(), rows[j].begin(), 0.0);
        for (std::size_t c = 0; c < dim; ++c) rows[i][c] -= dot * rows[j][c];
      }
      const double norm =
          std::sqrt(std::inner_product(rows[i].begin(), rows[i].end(), rows[i].begin(), 0.0));
      if (norm < 1e-8) continue;
      for (double& x : rows[i]) x /= norm;
      break;
    }
  }
  return rows;
}

struct Embedding {
  std::vector<float> truth;
  std::vector<float> proxy;
};

struct Warp {
  std::vector<Matrix> rotations;  // stacked blocks; the stack has spectral norm <= sqrt(blocks)
  std::size_t features = 0;
  std::vector<double> phases;
  double frequency = 1.0;
  double amplitude = 0.0;  // sqrt(1 - 1/C^2)
};

Embedding embed(const std::vector<std::vector<double>>& points, const Matrix& rotation,
                const std::vector<double>& weights, const Warp* warp) {
  const std::size_t dim = weights.size();
  Embedding out;
  out.truth.reserve(points.size() * dim);
  out.proxy.reserve(points.size() * dim);
  for (const auto& p : points) {
    for (double x : p) out.truth.push_back(static_cast<float>(x));
    for (std::size_t r = 0; r < dim; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < dim; ++c) acc += rotation[r][c] * p[c];
      out.proxy.push_back(static_cast<float>(weights[r] * acc));
    }
    if (warp == nullptr) continue;
    // h(x) = sin(w U x + phi) / (w * sqrt(blocks)) has Jacobian norm <= 1.
    const double norm = warp->frequency * std::sqrt(static_cast<double>(warp->rotations.size()));
    std::size_t feature = 0;
    for (const auto& block : warp->rotations) {
      for (std::size_t r = 0; r < dim && feature < warp->features; ++r, ++feature) {
        const double proj = std::inner_product(block[r].begin(), block[r].end(), p.begin(), 0.0);
        const double h = std::sin(warp->frequency * proj + warp->phases[feature]) / norm;
        out.proxy.push_back(static_cast<float>(warp->amplitude * h));
      }
    }
  }
  return out;
}

}  // namespace

BiMetricDataset generate_synthetic(const SynthParams& params) {
  if (params.dim == 0) throw ParameterError("synthetic dim must be positive");
  if (!(params.C >= 1.0)) throw ParameterError("synthetic C must be at least 1");
  if (params.n == 0) throw ParameterError("synthetic corpus must be nonempty");

  std::mt19937_64 point_rng(child_seed(params.seed, "points"));
  std::mt19937_64 query_rng(child_seed(params.seed, "queries"));
  std::mt19937_64 rotation_rng(child_seed(params.seed, "rotation"));
  std::mt19937_64 weight_rng(child_seed(params.seed, "weights"));

  std::vector<std::vector<double>> corpus(params.n), queries(params.queries);
  for (auto& p : corpus) p = uniform_in_ball(params.dim, point_rng);
  for (auto& q : queries) q = uniform_in_ball(params.dim, query_rng);

  const Matrix rotation = random_rotation(params.dim, rotation_rng);
  std::vector<std::vector<double>> shifted = queries;
  if (params.query_shift > 0.0) {
    std::mt19937_64 shift_rng(child_seed(params.seed, "query-shift"));
    std::normal_distribution<double> normal;
    for (auto& q : shifted) {
      std::vector<double> dir(params.dim);
      double norm = 0.0;
      for (double& x : dir) {
        x = normal(shift_rng);
        norm += x * x;
      }
      norm = std::sqrt(norm);
      for (std::size_t c = 0; c < params.dim; ++c) q[c] += params.query_shift * dir[c] / norm;
    }
  }
  std::vector<double> weights(params.dim);
  if (params.weights == AxisWeights::kUniform) {
    std::uniform_real_distribution<double> scale(1.0 / params.C, 1.0);
    for (double& w : weights) w = scale(weight_rng);
  } else {
    for (std::size_t i = 0; i < params.dim; ++i) weights[i] = i % 2 == 0 ? 1.0 / params.C : 1.0;
  }
  // Pin both ends so the ratio bound C is attained along some direction.
  weights[0] = 1.0 / params.C;
  if (params.dim > 1) weights[1] = 1.0;
  std::shuffle(weights.begin(), weights.end(), weight_rng);

  Warp warp;
  if (params.model == ProxyModel::kWarped) {
    if (params.warp_features == 0) throw ParameterError("warped proxy needs at least one feature");
    if (!(params.warp_frequency > 0.0)) throw ParameterError("warp frequency must be positive");
    std::mt19937_64 warp_rng(child_seed(params.seed, "warp"));
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::acos(-1.0));
    const std::size_t blocks = (params.warp_features + params.dim - 1) / params.dim;
    for (std::size_t b = 0; b < blocks; ++b) {
      warp.rotations.push_back(random_rotation(params.dim, warp_rng));
    }
    warp.features = params.warp_features;
    warp.phases.resize(params.warp_features);
    for (double& ph : warp.phases) ph = phase(warp_rng);
    warp.frequency = params.warp_frequency;
    warp.amplitude = std::sqrt(1.0 - 1.0 / (params.C * params.C));
    // Linear part is x / C.
    std::fill(weights.begin(), weights.end(), 1.0 / params.C);
  }
  const Warp* warp_ptr = params.model == ProxyModel::kWarped ? &warp : nullptr;
  auto corpus_embedding = embed(corpus, rotation, weights, warp_ptr);
  auto query_embedding = embed(queries, rotation, weights, warp_ptr);
  if (params.query_shift > 0.0) {
    query_embedding.proxy = embed(shifted, rotation, weights, warp_ptr).proxy;
  }

  BiMetricDataset dataset;
  dataset.name = params.name;
  dataset.corpus_truth = std::make_shared<const EmbeddingSet>(params.dim, std::move(corpus_embedding.truth));
  const std::size_t proxy_dim = params.dim + (warp_ptr ? params.warp_features : 0);
  dataset.corpus_proxy = std::make_shared<const EmbeddingSet>(proxy_dim, std::move(corpus_embedding.proxy));
  dataset.queries_truth = std::make_shared<const EmbeddingSet>(params.dim, std::move(query_embedding.truth));
  dataset.queries_proxy = std::make_shared<const EmbeddingSet>(proxy_dim, std::move(query_embedding.proxy));

  // Relevance: the true top-k under D, grade 1.
  const DistanceOracle D(MetricKind::kTruth, dataset.corpus_truth, dataset.queries_truth);
  const std::size_t k = std::min(params.qrels_k, params.n);
  std::vector<Neighbor> all(params.n);
  for (std::uint32_t q = 0; q < params.queries; ++q) {
    for (NodeId v = 0; v < params.n; ++v) all[v] = {v, D.distance(Endpoint::query(q), v)};
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
    for (std::size_t j = 0; j < k; ++j) dataset.qrels[q][all[j].id] = 1;
  }
  return dataset;
}

}  // namespace bimetric
