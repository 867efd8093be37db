#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "bimetric/metric.hpp"
#include "bimetric/types.hpp"

namespace bimetric {

// Directed proximity graph over corpus ids. Adjacency lists are sorted by id
// and free of self-loops and duplicates.
struct ReachabilityGraph {
  std::uint32_t n = 0;
  double alpha = 1.0;
  std::optional<std::uint32_t> cap;  // nullopt: uncapped, theory-grade build
  NodeId start_node = 0;
  std::vector<std::vector<NodeId>> adjacency;

  std::span<const NodeId> neighbors(NodeId v) const { return adjacency[v]; }
  std::size_t edge_count() const;
  std::size_t max_degree() const;
  double mean_degree() const;

  friend bool operator==(const ReachabilityGraph&, const ReachabilityGraph&) = default;
};

struct GraphBuildOptions {
  double alpha = 1.2;
  std::optional<std::uint32_t> cap = 64;
  unsigned threads = 1;
};

// Slow-preprocessing construction: every node scans all others in ascending
// distance (ties by id) and keeps q unless a kept neighbor p' already has
// alpha * d(p', q) <= d(p, q). With a cap, the scan stops once the list is
// full. Exact duplicate vectors are collapsed before the scan and re-attached
// as mutual neighbors of their representative.
ReachabilityGraph build_alpha_graph(const DistanceOracle& d, const GraphBuildOptions& options);

// Node minimizing the sum of distances to all others (ties by id).
NodeId find_medoid(const DistanceOracle& d, unsigned threads = 1);

struct ReachabilityCheck {
  bool ok = true;
  std::optional<std::pair<NodeId, NodeId>> counterexample;  // first failing (p, q)
};

ReachabilityCheck verify_shortcut_reachability(const ReachabilityGraph& graph,
                                               const DistanceOracle& metric, double alpha);

enum class Termination : std::uint8_t { kFrontierExhausted, kBudget };

struct SearchTrace {
  std::vector<Neighbor> visited;  // expanded nodes, ascending
  std::vector<Neighbor> seen;     // every evaluated node, ascending
  std::vector<NodeId> visit_order;
  std::uint64_t calls_d = 0;
  std::uint64_t calls_D = 0;
  Termination terminated_by = Termination::kFrontierExhausted;
};

// Greedy search keeping the `beam` closest candidates. beam == 1 is the
// single-candidate descent; larger beams are best-first search over a bounded
// candidate list. Stops when every candidate has been expanded or when the
// oracle's budget runs out, keeping whatever was evaluated.
SearchTrace greedy_search(const ReachabilityGraph& graph, CountingOracle& oracle, Endpoint query,
                          std::span<const NodeId> starts, std::size_t beam);

// The `count` nearest corpus points to `query` under `d`, found with a
// beam search from the graph's start node. A beam at least the corpus size
// switches to an exhaustive scan, which is exact.
std::vector<Neighbor> first_stage_candidates(const ReachabilityGraph& graph, CountingOracle& d,
                                             Endpoint query, std::size_t count,
                                             std::size_t beam);

enum class StartMode : std::uint8_t { kHalfBudget, kFixed, kDefaultEntry };

std::string to_string(StartMode mode);
StartMode parse_start_mode(const std::string& text);

struct TwoStageParams {
  std::uint64_t budget = 0;  // Q, D evaluations
  std::size_t k = 10;
  StartMode start_mode = StartMode::kHalfBudget;
  std::size_t fixed_starts = 100;  // used by kFixed
  std::size_t stage1_beam = 5000;
  std::size_t stage2_beam = 0;  // 0: same as the budget
};

// Number of stage-two starting points for a mode and budget.
std::size_t start_count(const TwoStageParams& params);

struct TwoStageResult {
  std::vector<Neighbor> top_k;
  std::uint64_t calls_d = 0;
  SearchTrace stage2;
};

// Stage one finds starting points under d (not budgeted); stage two runs
// greedy search under D from them until the frontier or the budget is
// exhausted. Returns the k closest points evaluated under D.
TwoStageResult two_stage_search(const ReachabilityGraph& graph, const DistanceOracle& d,
                                CountingOracle& D, Endpoint query, const TwoStageParams& params);

// Default beam for the first stage: 30000 for corpora over a million points,
// 5000 otherwise.
std::size_t default_stage1_beam(std::size_t corpus_size);

void save_graph(const std::filesystem::path& path, const ReachabilityGraph& graph);
ReachabilityGraph load_graph(const std::filesystem::path& path);
std::vector<std::byte> serialize_graph(const ReachabilityGraph& graph);
ReachabilityGraph parse_graph(std::span<const std::byte> bytes);

}  // namespace bimetric
