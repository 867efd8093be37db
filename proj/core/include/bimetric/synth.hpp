#pragma once

#include <cstdint>
#include <string>

#include "bimetric/dataset.hpp"

namespace bimetric {

// Synthetic bi-metric instance. Base points are uniform in a unit ball of
// `dim` dimensions and define the ground-truth space. Either proxy model
// keeps d <= D <= C * d for every pair, queries included (up to float32
// rounding of the stored vectors), unless query_shift > 0.
// kLinear: proxy = diag(w) R x, a fixed rotation followed by per-axis scales
// in [1/C, 1]. kWarped: proxy = [x / C, sqrt(1 - 1/C^2) h(x)] where h is a
// 1-Lipschitz random sinusoidal feature map; the sandwich D/C <= d <= D still
// holds exactly, but proxy rankings are scrambled below the warp wavelength.
enum class ProxyModel : std::uint8_t { kLinear, kWarped };

// How the per-axis proxy scales are drawn: uniformly from [1/C, 1], or
// alternating between the two ends.
enum class AxisWeights : std::uint8_t { kUniform, kBimodal };

struct SynthParams {
  std::string name = "synthetic";
  std::size_t n = 1000;
  std::size_t queries = 100;
  std::size_t dim = 8;
  double C = 2.0;
  ProxyModel model = ProxyModel::kLinear;
  AxisWeights weights = AxisWeights::kUniform;
  // kWarped only: number of sinusoidal features (extra proxy coordinates)
  // and their angular frequency.
  std::size_t warp_features = 4;
  double warp_frequency = 4.0;
  // Query-side proxy error: each query's proxy vector is the proxy image of
  // the query displaced by this distance in a random direction. Zero keeps
  // the sandwich exact for query pairs too.
  double query_shift = 0.0;
  std::size_t qrels_k = 10;
  std::uint64_t seed = 0;
};

BiMetricDataset generate_synthetic(const SynthParams& params);

}  // namespace bimetric
