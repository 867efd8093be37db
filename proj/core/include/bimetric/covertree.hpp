#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bimetric/metric.hpp"
#include "bimetric/types.hpp"

namespace bimetric {

// Greedy r-cover: scan `points` in the given order, keep a point if nothing
// kept so far is within r of it. Distances are d * scale.
std::vector<NodeId> build_cover(const DistanceOracle& d, std::span<const NodeId> points, double r,
                                double scale = 1.0);

// One explicit node: point `point` at every level in [lo, hi]. Self-child
// chains are coalesced, so a node either is the bottom of its point's chain
// (lo == -1) or has children at level lo - 1.
struct CoverNode {
  NodeId point = 0;
  int lo = -1;
  int hi = -1;
  std::int32_t parent = -1;
  std::vector<std::uint32_t> children;  // node indices, each with hi == lo - 1
};

// Nested covers C_top ⊆ ... ⊆ C_0 = C_{-1} = X, where C_i is a 2^i/T cover
// of C_{i-1} under scaled d. Node 0 is the root.
struct CoverTree {
  double T = 1.0;
  double scale = 1.0;  // raw d * scale puts all pairwise distances in (1, Δ]
  bool scale_exact = true;
  int top_level = 0;
  std::uint32_t n = 0;  // corpus size, duplicates included
  std::vector<CoverNode> nodes;
  std::map<NodeId, std::vector<NodeId>> duplicates;

  bool empty() const { return nodes.empty(); }
  double level_radius(int level) const;
  std::string to_json() const;
  static CoverTree from_json(const std::string& text);
};

struct CoverTreeOptions {
  double T = 1.0;
  std::size_t exact_threshold = 2000;
  std::size_t sample_pairs = 200000;
  std::uint64_t seed = 0;
};

CoverTree build_cover_tree(const DistanceOracle& d, const CoverTreeOptions& options);

struct CoverTreeCheck {
  bool ok = true;
  std::vector<std::string> failures;  // first few, human readable
  std::size_t explicit_nodes = 0;
  int levels = 0;
};

// Rebuilds the implicit levels from the explicit nodes and checks nesting,
// covering, separation, the 2n - 1 node bound, and the descendant bound
// under d (radius 2^i / T). If `D` is given, also checks the descendant
// bound 2^i under D (in the tree's scaled units).
CoverTreeCheck verify_cover_tree(const CoverTree& tree, const DistanceOracle& d,
                                 const DistanceOracle* D = nullptr);

enum class CoverExit : std::uint8_t { kSingleton, kEarlyExit };

struct CoverSearchResult {
  NodeId point = 0;
  double distance = 0.0;  // raw D
  std::uint64_t calls_D = 0;
  CoverExit exit = CoverExit::kSingleton;
  bool truncated = false;
  int exit_level = -1;
};

// Level-by-level descent under D. Keeps children within D(q, Q) + 2^i and
// stops early once the closest kept point is at least 2^i (1 + 1/eps) away.
CoverSearchResult cover_tree_search(const CoverTree& tree, CountingOracle& D, Endpoint query,
                                    double eps);

void save_cover_tree(const std::filesystem::path& path, const CoverTree& tree);
CoverTree load_cover_tree(const std::filesystem::path& path);

}  // namespace bimetric
