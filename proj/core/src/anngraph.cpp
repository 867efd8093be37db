#include "bimetric/anngraph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "bimetric/parallel.hpp"

namespace bimetric {

std::size_t ReachabilityGraph::edge_count() const {
  std::size_t total = 0;
  for (const auto& list : adjacency) total += list.size();
  return total;
}

std::size_t ReachabilityGraph::max_degree() const {
  std::size_t best = 0;
  for (const auto& list : adjacency) best = std::max(best, list.size());
  return best;
}

double ReachabilityGraph::mean_degree() const {
  return n == 0 ? 0.0 : static_cast<double>(edge_count()) / n;
}

namespace {

// Pairwise distances among a subset of corpus ids, either precomputed or on
// demand. Indices are positions in `ids`.
class PairwiseDistances {
 public:
  static constexpr std::size_t kMatrixLimit = 2048;

  PairwiseDistances(const DistanceOracle& metric, std::vector<NodeId> ids, unsigned threads)
      : metric_(metric), ids_(std::move(ids)) {
    const std::size_t m = ids_.size();
    if (m <= kMatrixLimit) {
      matrix_.resize(m * m);
      parallel_for(m, threads, [&](std::size_t i) {
        for (std::size_t j = 0; j < m; ++j) {
          matrix_[i * m + j] = i == j ? 0.0 : metric_.between(ids_[i], ids_[j]);
        }
      });
    }
  }

  std::size_t size() const { return ids_.size(); }
  NodeId id(std::size_t i) const { return ids_[i]; }

  double operator()(std::size_t i, std::size_t j) const {
    if (!matrix_.empty()) return matrix_[i * ids_.size() + j];
    return metric_.between(ids_[i], ids_[j]);
  }

 private:
  const DistanceOracle& metric_;
  std::vector<NodeId> ids_;
  std::vector<double> matrix_;
};

std::size_t medoid_position(const PairwiseDistances& dist, unsigned threads) {
  const std::size_t m = dist.size();
  std::vector<double> sums(m, 0.0);
  parallel_for(m, threads, [&](std::size_t i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += dist(i, j);
    sums[i] = s;
  });
  return static_cast<std::size_t>(std::min_element(sums.begin(), sums.end()) - sums.begin());
}

}  // namespace

NodeId find_medoid(const DistanceOracle& d, unsigned threads) {
  const std::size_t n = d.corpus_size();
  if (n == 0) throw ParameterError("medoid of an empty set");
  std::vector<NodeId> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  const PairwiseDistances dist(d, std::move(ids), threads);
  return static_cast<NodeId>(medoid_position(dist, threads));
}

ReachabilityGraph build_alpha_graph(const DistanceOracle& d, const GraphBuildOptions& options) {
  if (!(options.alpha > 1.0)) {
    throw ParameterError("alpha must be greater than 1, got " + std::to_string(options.alpha));
  }
  if (options.cap && *options.cap == 0) throw ParameterError("degree cap must be positive");

  ReachabilityGraph graph;
  graph.n = static_cast<std::uint32_t>(d.corpus_size());
  graph.alpha = options.alpha;
  graph.cap = options.cap;
  graph.adjacency.resize(graph.n);
  if (graph.n == 0) return graph;

  const DuplicateGroups groups = find_duplicates(*d.corpus());
  const PairwiseDistances dist(d, groups.representatives(), options.threads);
  const std::size_t m = dist.size();

  parallel_for(m, options.threads, [&](std::size_t p) {
    std::vector<std::pair<double, std::size_t>> order;
    order.reserve(m - 1);
    for (std::size_t q = 0; q < m; ++q) {
      if (q != p) order.emplace_back(dist(p, q), q);
    }
    // Positions follow ascending id, so pair order breaks ties by id.
    std::sort(order.begin(), order.end());

    std::vector<std::size_t> kept;
    for (const auto& [dpq, q] : order) {
      if (options.cap && kept.size() >= *options.cap) break;
      const bool pruned = std::any_of(kept.begin(), kept.end(), [&](std::size_t kept_q) {
        return options.alpha * dist(kept_q, q) <= dpq;
      });
      if (!pruned) kept.push_back(q);
    }
    auto& out = graph.adjacency[dist.id(p)];
    out.reserve(kept.size());
    for (std::size_t q : kept) out.push_back(dist.id(q));
    std::sort(out.begin(), out.end());
  });

  // A duplicate shares its representative's neighbors, and the members of a
  // group link to each other.
  for (const auto& [rep, others] : groups.duplicates) {
    std::vector<NodeId> group = others;
    group.push_back(rep);
    const std::vector<NodeId> base = graph.adjacency[rep];
    for (NodeId member : group) {
      auto& list = graph.adjacency[member];
      list = base;
      for (NodeId other : group) {
        if (other != member) list.push_back(other);
      }
      std::sort(list.begin(), list.end());
      list.erase(std::unique(list.begin(), list.end()), list.end());
    }
  }

  graph.start_node = dist.id(medoid_position(dist, options.threads));
  return graph;
}

ReachabilityCheck verify_shortcut_reachability(const ReachabilityGraph& graph,
                                               const DistanceOracle& metric, double alpha) {
  if (metric.corpus_size() != graph.n) {
    throw ParameterError("graph and metric disagree on the number of points");
  }
  std::vector<NodeId> ids(graph.n);
  std::iota(ids.begin(), ids.end(), 0);
  const PairwiseDistances dist(metric, std::move(ids), 1);

  std::vector<char> is_edge(graph.n, 0);
  for (NodeId p = 0; p < graph.n; ++p) {
    const auto nbrs = graph.neighbors(p);
    for (NodeId v : nbrs) is_edge[v] = 1;
    for (NodeId q = 0; q < graph.n; ++q) {
      if (q == p || is_edge[q]) continue;
      const double dpq = dist(p, q);
      const bool shortcut = std::any_of(nbrs.begin(), nbrs.end(), [&](NodeId v) {
        return dist(v, q) * alpha <= dpq;
      });
      if (!shortcut) return {false, std::make_pair(p, q)};
    }
    for (NodeId v : nbrs) is_edge[v] = 0;
  }
  return {};
}

SearchTrace greedy_search(const ReachabilityGraph& graph, CountingOracle& oracle, Endpoint query,
                          std::span<const NodeId> starts, std::size_t beam) {
  if (starts.empty()) throw ParameterError("greedy search needs at least one start");
  if (beam == 0) throw ParameterError("beam must be positive");
  for (NodeId s : starts) {
    if (s >= graph.n) throw std::out_of_range("start id " + std::to_string(s) + " out of range");
  }

  SearchTrace trace;
  const std::uint64_t calls_before = oracle.calls();
  constexpr double kUnknown = -1.0;
  std::vector<double> known(graph.n, kUnknown);
  std::vector<char> visited(graph.n, 0);
  std::vector<char> in_beam(graph.n, 0);
  std::set<Neighbor> candidates;  // A
  std::set<Neighbor> frontier;    // A minus U
  bool budget_hit = false;

  auto evaluate = [&](NodeId v) -> bool {
    if (known[v] != kUnknown) return true;
    try {
      known[v] = oracle.distance(query, v);
    } catch (const BudgetExhausted&) {
      budget_hit = true;
      return false;
    }
    trace.seen.push_back({v, known[v]});
    return true;
  };
  auto offer = [&](NodeId v) {
    if (in_beam[v]) return;
    const Neighbor entry{v, known[v]};
    candidates.insert(entry);
    in_beam[v] = 1;
    if (!visited[v]) frontier.insert(entry);
    if (candidates.size() > beam) {
      const Neighbor worst = *std::prev(candidates.end());
      candidates.erase(std::prev(candidates.end()));
      frontier.erase(worst);
      in_beam[worst.id] = 0;
    }
  };

  for (NodeId s : starts) {
    if (!evaluate(s)) break;
    offer(s);
  }
  while (!frontier.empty() && !budget_hit) {
    const Neighbor v = *frontier.begin();
    frontier.erase(frontier.begin());
    visited[v.id] = 1;
    trace.visited.push_back(v);
    trace.visit_order.push_back(v.id);
    for (NodeId w : graph.neighbors(v.id)) {
      if (!evaluate(w)) break;
      offer(w);
    }
  }

  trace.terminated_by = budget_hit ? Termination::kBudget : Termination::kFrontierExhausted;
  std::sort(trace.visited.begin(), trace.visited.end());
  std::sort(trace.seen.begin(), trace.seen.end());
  const std::uint64_t calls = oracle.calls() - calls_before;
  (oracle.kind() == MetricKind::kProxy ? trace.calls_d : trace.calls_D) = calls;
  return trace;
}

std::vector<Neighbor> first_stage_candidates(const ReachabilityGraph& graph, CountingOracle& d,
                                             Endpoint query, std::size_t count,
                                             std::size_t beam) {
  count = std::min<std::size_t>(count, graph.n);
  if (count == 0) return {};
  std::vector<Neighbor> result;
  if (beam >= graph.n) {
    result.reserve(graph.n);
    for (NodeId v = 0; v < graph.n; ++v) result.push_back({v, d.distance(query, v)});
    std::partial_sort(result.begin(), result.begin() + static_cast<std::ptrdiff_t>(count),
                      result.end());
  } else {
    const NodeId start = graph.start_node;
    result = greedy_search(graph, d, query, std::span(&start, 1), std::max(beam, count)).visited;
  }
  if (result.size() > count) result.resize(count);
  return result;
}

std::string to_string(StartMode mode) {
  switch (mode) {
    case StartMode::kHalfBudget: return "half-budget";
    case StartMode::kFixed: return "fixed";
    case StartMode::kDefaultEntry: return "default-entry";
  }
  return "unknown";
}

StartMode parse_start_mode(const std::string& text) {
  if (text == "half-budget") return StartMode::kHalfBudget;
  if (text == "fixed") return StartMode::kFixed;
  if (text == "default-entry" || text == "default") return StartMode::kDefaultEntry;
  throw ParameterError("unknown start mode '" + text + "'");
}

std::size_t start_count(const TwoStageParams& params) {
  switch (params.start_mode) {
    case StartMode::kHalfBudget: return std::max<std::uint64_t>(1, params.budget / 2);
    case StartMode::kFixed:
      return std::max<std::size_t>(1, std::min<std::uint64_t>(params.fixed_starts, params.budget));
    case StartMode::kDefaultEntry: return 1;
  }
  return 1;
}

std::size_t default_stage1_beam(std::size_t corpus_size) {
  return corpus_size > 1'000'000 ? 30000 : 5000;
}

TwoStageResult two_stage_search(const ReachabilityGraph& graph, const DistanceOracle& d,
                                CountingOracle& D, Endpoint query, const TwoStageParams& params) {
  if (params.k == 0) throw ParameterError("k must be positive");
  if (params.budget < params.k) {
    throw ParameterError("budget " + std::to_string(params.budget) + " is smaller than k " +
                         std::to_string(params.k));
  }
  if (graph.n == 0) return {};

  TwoStageResult result;
  std::vector<NodeId> starts;
  if (params.start_mode == StartMode::kDefaultEntry) {
    starts.push_back(graph.start_node);
  } else {
    CountingOracle proxy(d);
    for (const auto& c : first_stage_candidates(graph, proxy, query, start_count(params),
                                                params.stage1_beam)) {
      starts.push_back(c.id);
    }
    result.calls_d = proxy.calls();
  }

  const std::size_t beam =
      params.stage2_beam > 0 ? params.stage2_beam : std::max<std::uint64_t>(params.budget, params.k);
  result.stage2 = greedy_search(graph, D, query, starts, beam);
  const auto& seen = result.stage2.seen;
  result.top_k.assign(seen.begin(), seen.begin() + static_cast<std::ptrdiff_t>(
                                                       std::min(seen.size(), params.k)));
  return result;
}

namespace {

constexpr char kGraphMagic[4] = {'B', 'M', 'A', 'G'};
constexpr std::uint32_t kGraphVersion = 1;

template <typename T>
void put(std::vector<std::byte>& out, T value) {
  const auto* p = reinterpret_cast<const std::byte*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T take(std::span<const std::byte> bytes, std::size_t& offset, const char* what) {
  if (bytes.size() - offset < sizeof(T)) {
    throw FormatError(std::string("truncated graph file reading ") + what + " at byte offset " +
                      std::to_string(offset));
  }
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  offset += sizeof(T);
  return value;
}

}  // namespace

std::vector<std::byte> serialize_graph(const ReachabilityGraph& graph) {
  std::vector<std::byte> out;
  out.reserve(28 + 4 * (graph.n + graph.edge_count()));
  for (char c : kGraphMagic) out.push_back(static_cast<std::byte>(c));
  put<std::uint32_t>(out, kGraphVersion);
  put<std::uint32_t>(out, graph.n);
  put<double>(out, graph.alpha);
  put<std::uint32_t>(out, graph.cap.value_or(0));
  put<std::uint32_t>(out, graph.start_node);
  for (const auto& list : graph.adjacency) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(list.size()));
    for (NodeId v : list) put<std::uint32_t>(out, v);
  }
  return out;
}

ReachabilityGraph parse_graph(std::span<const std::byte> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kGraphMagic, 4) != 0) {
    throw FormatError("not a BMAG graph file (bad magic)");
  }
  std::size_t offset = 4;
  const auto version = take<std::uint32_t>(bytes, offset, "version");
  if (version != kGraphVersion) {
    throw FormatError("unsupported BMAG version " + std::to_string(version));
  }
  ReachabilityGraph graph;
  graph.n = take<std::uint32_t>(bytes, offset, "node count");
  graph.alpha = take<double>(bytes, offset, "alpha");
  const auto cap = take<std::uint32_t>(bytes, offset, "cap");
  if (cap != 0) graph.cap = cap;
  graph.start_node = take<std::uint32_t>(bytes, offset, "start node");
  if (graph.n > 0 && graph.start_node >= graph.n) throw FormatError("start node out of range");
  graph.adjacency.resize(graph.n);
  for (NodeId v = 0; v < graph.n; ++v) {
    const auto degree = take<std::uint32_t>(bytes, offset, "degree");
    if (degree > graph.n) throw FormatError("degree of node " + std::to_string(v) + " exceeds n");
    auto& list = graph.adjacency[v];
    list.reserve(degree);
    for (std::uint32_t i = 0; i < degree; ++i) {
      const auto u = take<std::uint32_t>(bytes, offset, "neighbor id");
      if (u >= graph.n) throw FormatError("neighbor id out of range at node " + std::to_string(v));
      list.push_back(u);
    }
  }
  if (offset != bytes.size()) {
    throw FormatError("trailing bytes after graph at byte offset " + std::to_string(offset));
  }
  return graph;
}

void save_graph(const std::filesystem::path& path, const ReachabilityGraph& graph) {
  const auto bytes = serialize_graph(graph);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

ReachabilityGraph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::span<const std::byte> bytes(reinterpret_cast<const std::byte*>(raw.data()), raw.size());
  try {
    return parse_graph(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace bimetric
