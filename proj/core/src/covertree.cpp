#include "bimetric/covertree.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "bimetric/seed.hpp"
#include "json.hpp"

namespace bimetric {

std::vector<NodeId> build_cover(const DistanceOracle& d, std::span<const NodeId> points, double r,
                                double scale) {
  if (!(r > 0.0)) throw ParameterError("cover radius must be positive");
  std::vector<NodeId> cover;
  for (NodeId p : points) {
    const bool covered = std::any_of(cover.begin(), cover.end(), [&](NodeId c) {
      return scale * d.between(c, p) <= r;
    });
    if (!covered) cover.push_back(p);
  }
  return cover;
}

double CoverTree::level_radius(int level) const { return std::ldexp(1.0, level) / T; }

namespace {

// Raw-to-scaled factor putting every nonzero pairwise distance above 1.
std::pair<double, bool> scale_for(const DistanceOracle& d, std::span<const NodeId> ids,
                                  const CoverTreeOptions& options) {
  double min_dist = std::numeric_limits<double>::infinity();
  const bool exact = ids.size() <= options.exact_threshold;
  if (exact) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (std::size_t j = i + 1; j < ids.size(); ++j) {
        const double v = d.between(ids[i], ids[j]);
        if (v > 0.0) min_dist = std::min(min_dist, v);
      }
    }
  } else {
    for (const auto& [a, b] :
         select_pairs(ids.size(), PairSelection::sampled(options.sample_pairs,
                                                         child_seed(options.seed, "cover-scale")))) {
      const double v = d.between(ids[a], ids[b]);
      if (v > 0.0) min_dist = std::min(min_dist, v);
    }
    min_dist *= 0.5;
  }
  if (!std::isfinite(min_dist)) return {1.0, exact};
  return {1.0 / (min_dist * (1.0 - 1e-9)), exact};
}

}  // namespace

CoverTree build_cover_tree(const DistanceOracle& d, const CoverTreeOptions& options) {
  if (!(options.T >= 1.0)) throw ParameterError("T must be at least 1");
  CoverTree tree;
  tree.T = options.T;
  tree.n = static_cast<std::uint32_t>(d.corpus_size());
  if (tree.n == 0) return tree;

  const DuplicateGroups groups = find_duplicates(*d.corpus());
  tree.duplicates = groups.duplicates;
  const std::vector<NodeId> reps = groups.representatives();
  std::tie(tree.scale, tree.scale_exact) = scale_for(d, reps, options);
  auto dist = [&](NodeId a, NodeId b) { return tree.scale * d.between(a, b); };

  // levels[i] holds C_i for i >= 0; C_{-1} == C_0.
  std::vector<std::vector<NodeId>> levels{reps};
  // parent_of[p] = (parent point, level i at which p in C_{i-1} \ C_i attaches)
  std::vector<std::pair<NodeId, int>> parent_of(tree.n, {0, -2});
  while (levels.back().size() > 1) {
    const int i = static_cast<int>(levels.size());
    const double r = tree.level_radius(i);
    const auto& below = levels.back();
    std::vector<NodeId> cover = build_cover(d, below, r, tree.scale);
    std::vector<char> in_cover(tree.n, 0);
    for (NodeId c : cover) in_cover[c] = 1;
    for (NodeId p : below) {
      if (in_cover[p]) continue;
      NodeId best = cover.front();
      double best_dist = std::numeric_limits<double>::infinity();
      for (NodeId c : cover) {
        const double v = dist(p, c);
        if (v < best_dist) {  // cover is in ascending id order, so ties keep the smaller id
          best = c;
          best_dist = v;
        }
      }
      parent_of[p] = {best, i};
    }
    levels.push_back(std::move(cover));
  }
  tree.top_level = static_cast<int>(levels.size()) - 1;

  // Levels at which each point gains non-self children, highest first.
  std::vector<std::vector<std::pair<int, NodeId>>> attached(tree.n);
  for (NodeId p : reps) {
    if (parent_of[p].second >= 1) attached[parent_of[p].first].push_back({parent_of[p].second, p});
  }
  for (auto& list : attached) {
    std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) {
      return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
  }

  // Emit the coalesced chain of `point` from level `hi` down, under `parent`.
  // Returns the index of the chain's top node.
  auto emit_chain = [&](auto&& self, NodeId point, int hi, std::int32_t parent) -> std::uint32_t {
    const auto& kids = attached[point];
    std::uint32_t first_index = 0;
    std::int32_t current_parent = parent;
    int current_hi = hi;
    std::size_t k = 0;
    bool first = true;
    while (true) {
      const int lo = k < kids.size() ? kids[k].first : -1;
      const auto index = static_cast<std::uint32_t>(tree.nodes.size());
      tree.nodes.push_back({point, lo, current_hi, current_parent, {}});
      if (current_parent >= 0) tree.nodes[static_cast<std::size_t>(current_parent)].children.push_back(index);
      if (first) {
        first_index = index;
        first = false;
      }
      if (lo == -1) break;
      // Non-self children at level lo - 1, then the self-continuation.
      while (k < kids.size() && kids[k].first == lo) {
        self(self, kids[k].second, lo - 1, static_cast<std::int32_t>(index));
        ++k;
      }
      current_parent = static_cast<std::int32_t>(index);
      current_hi = lo - 1;
    }
    return first_index;
  };
  const NodeId root = levels.back().front();
  emit_chain(emit_chain, root, tree.top_level, -1);
  return tree;
}

CoverTreeCheck verify_cover_tree(const CoverTree& tree, const DistanceOracle& d,
                                 const DistanceOracle* D) {
  CoverTreeCheck check;
  check.explicit_nodes = tree.nodes.size();
  auto fail = [&](std::string message) {
    check.ok = false;
    if (check.failures.size() < 20) check.failures.push_back(std::move(message));
  };
  if (tree.nodes.empty()) return check;

  const std::size_t distinct = tree.n - [&] {
    std::size_t dups = 0;
    for (const auto& [rep, others] : tree.duplicates) dups += others.size();
    return dups;
  }();
  if (tree.nodes.size() > 2 * distinct - 1) {
    fail("explicit node count " + std::to_string(tree.nodes.size()) + " exceeds 2n-1");
  }

  // Parent and child links agree, and every node hangs off the root.
  std::vector<char> reached(tree.nodes.size(), 0);
  std::vector<std::uint32_t> walk{0};
  reached[0] = 1;
  while (!walk.empty()) {
    const auto v = walk.back();
    walk.pop_back();
    for (auto c : tree.nodes[v].children) {
      if (c >= tree.nodes.size() || tree.nodes[c].parent != static_cast<std::int32_t>(v)) {
        fail("child link of node " + std::to_string(v) + " does not match its child's parent");
        continue;
      }
      if (!reached[c]) {
        reached[c] = 1;
        walk.push_back(c);
      }
    }
  }
  const auto unreached = static_cast<std::size_t>(std::count(reached.begin(), reached.end(), 0));
  if (unreached > 0) fail(std::to_string(unreached) + " nodes are not reachable from the root");

  // Per point: the union of node spans must be one contiguous run [-1, top].
  std::map<NodeId, std::vector<std::pair<int, int>>> spans;
  for (const auto& node : tree.nodes) {
    if (node.lo > node.hi) fail("node of point " + std::to_string(node.point) + " has empty span");
    spans[node.point].push_back({node.lo, node.hi});
  }
  std::map<NodeId, int> top;
  for (auto& [point, list] : spans) {
    std::sort(list.begin(), list.end());
    if (list.front().first != -1) fail("point " + std::to_string(point) + " missing from C_{-1}");
    for (std::size_t k = 1; k < list.size(); ++k) {
      if (list[k].first != list[k - 1].second + 1) {
        fail("point " + std::to_string(point) + " has a gap in its level span (nesting)");
      }
    }
    top[point] = list.back().second;
  }
  if (spans.size() != distinct) fail("tree holds " + std::to_string(spans.size()) + " points, expected " + std::to_string(distinct));
  check.levels = tree.top_level + 2;

  auto dist_d = [&](NodeId a, NodeId b) { return tree.scale * d.between(a, b); };

  // Covering: the top node of every non-root point hangs off a node of another
  // point at level top + 1 within 2^(top+1) / T.
  for (std::size_t v = 0; v < tree.nodes.size(); ++v) {
    const auto& node = tree.nodes[v];
    if (node.parent < 0) {
      if (v != 0) fail("non-root node without parent");
      continue;
    }
    const auto& parent = tree.nodes[static_cast<std::size_t>(node.parent)];
    if (node.hi != parent.lo - 1) fail("child span does not start below its parent");
    if (parent.point == node.point) continue;
    const int i = node.hi + 1;
    if (top[parent.point] < i) fail("parent point not present at level " + std::to_string(i));
    if (dist_d(node.point, parent.point) > tree.level_radius(i)) {
      fail("covering violated: point " + std::to_string(node.point) + " is farther than 2^" +
           std::to_string(i) + "/T from its parent");
    }
  }

  // Separation on every level.
  for (int i = -1; i <= tree.top_level; ++i) {
    std::vector<NodeId> level;
    for (const auto& [point, t] : top) {
      if (t >= i) level.push_back(point);
    }
    if (i == tree.top_level && level.size() != 1) fail("top level is not a singleton");
    const double r = tree.level_radius(i);
    for (std::size_t a = 0; a < level.size(); ++a) {
      for (std::size_t b = a + 1; b < level.size(); ++b) {
        if (dist_d(level[a], level[b]) <= r) {
          fail("separation violated at level " + std::to_string(i) + " between " +
               std::to_string(level[a]) + " and " + std::to_string(level[b]));
        }
      }
    }
  }

  // Descendant bound: everything under node v (at level v.lo) lies within
  // 2^(lo+1)/T of v's point under d, and within 2^(lo+1) under D.
  std::vector<std::uint32_t> stack;
  for (std::size_t v = 0; v < tree.nodes.size(); ++v) {
    const auto& node = tree.nodes[v];
    const double bound = std::ldexp(1.0, node.lo + 1);
    stack.assign(node.children.begin(), node.children.end());
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      const auto& desc = tree.nodes[u];
      if (dist_d(node.point, desc.point) > bound / tree.T) {
        fail("descendant bound under d violated below point " + std::to_string(node.point));
      }
      if (D != nullptr && tree.scale * D->between(node.point, desc.point) > bound) {
        fail("descendant bound under D violated below point " + std::to_string(node.point));
      }
      stack.insert(stack.end(), desc.children.begin(), desc.children.end());
    }
  }
  return check;
}

CoverSearchResult cover_tree_search(const CoverTree& tree, CountingOracle& D, Endpoint query,
                                    double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw ParameterError("eps must lie in (0, 1)");
  if (tree.empty()) throw ParameterError("cannot search an empty cover tree");

  CoverSearchResult result;
  const std::uint64_t calls_before = D.calls();
  std::vector<Neighbor> evaluated;  // scaled distances, across all levels
  auto finish = [&](std::span<const std::uint32_t> kept, const std::vector<double>& kept_dist) {
    Neighbor best{0, std::numeric_limits<double>::infinity()};
    for (std::size_t j = 0; j < kept.size(); ++j) {
      const Neighbor candidate{tree.nodes[kept[j]].point, kept_dist[j]};
      if (candidate < best) best = candidate;
    }
    if (!std::isfinite(best.distance) && !evaluated.empty()) {
      best = *std::min_element(evaluated.begin(), evaluated.end());
    }
    result.point = best.id;
    result.distance = best.distance / tree.scale;
    result.calls_D = D.calls() - calls_before;
    return result;
  };

  std::vector<std::uint32_t> current{0};  // Q_i as node indices
  std::vector<double> current_dist{std::numeric_limits<double>::infinity()};
  std::vector<std::uint32_t> next;
  std::vector<double> next_dist;
  for (int i = tree.top_level; i != -1; --i) {
    // Q: points of C_{i-1} whose parent is in Q_i, self-children included.
    next.clear();
    for (auto v : current) {
      const auto& node = tree.nodes[v];
      if (node.lo < i) {
        next.push_back(v);
      } else {
        next.insert(next.end(), node.children.begin(), node.children.end());
      }
    }
    next_dist.assign(next.size(), std::numeric_limits<double>::infinity());
    double closest = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < next.size(); ++j) {
      const NodeId point = tree.nodes[next[j]].point;
      try {
        next_dist[j] = tree.scale * D.distance(query, point);
      } catch (const BudgetExhausted&) {
        result.truncated = true;
        result.exit_level = i;
        // Best-so-far among everything evaluated.
        current.clear();
        current_dist.clear();
        return finish(current, current_dist);
      }
      evaluated.push_back({point, next_dist[j]});
      closest = std::min(closest, next_dist[j]);
    }
    const double radius = std::ldexp(1.0, i);
    current.clear();
    current_dist.clear();
    for (std::size_t j = 0; j < next.size(); ++j) {
      if (next_dist[j] <= closest + radius) {
        current.push_back(next[j]);
        current_dist.push_back(next_dist[j]);
      }
    }
    if (closest >= radius * (1.0 + 1.0 / eps)) {
      result.exit = CoverExit::kEarlyExit;
      result.exit_level = i;
      return finish(current, current_dist);
    }
  }
  result.exit = CoverExit::kSingleton;
  result.exit_level = -1;
  return finish(current, current_dist);
}

std::string CoverTree::to_json() const {
  nlohmann::json nodes_json = nlohmann::json::array();
  for (const auto& node : nodes) {
    nodes_json.push_back({{"point", node.point},
                          {"lo", node.lo},
                          {"hi", node.hi},
                          {"parent", node.parent},
                          {"children", node.children}});
  }
  nlohmann::json dups = nlohmann::json::object();
  for (const auto& [rep, others] : duplicates) dups[std::to_string(rep)] = others;
  nlohmann::json j = {{"header",
                       {{"T", T}, {"scale", scale}, {"scale_exact", scale_exact}, {"t", top_level}, {"n", n}}},
                      {"nodes", nodes_json},
                      {"duplicates", dups}};
  return j.dump();
}

CoverTree CoverTree::from_json(const std::string& text) {
  CoverTree tree;
  try {
    const auto j = nlohmann::json::parse(text);
    const auto& header = j.at("header");
    tree.T = header.at("T").get<double>();
    tree.scale = header.at("scale").get<double>();
    tree.scale_exact = header.value("scale_exact", true);
    tree.top_level = header.at("t").get<int>();
    tree.n = header.at("n").get<std::uint32_t>();
    for (const auto& node : j.at("nodes")) {
      tree.nodes.push_back({node.at("point").get<NodeId>(), node.at("lo").get<int>(),
                            node.at("hi").get<int>(), node.at("parent").get<std::int32_t>(),
                            node.at("children").get<std::vector<std::uint32_t>>()});
    }
    if (j.contains("duplicates")) {
      for (const auto& [rep, others] : j.at("duplicates").items()) {
        tree.duplicates[static_cast<NodeId>(std::stoul(rep))] = others.get<std::vector<NodeId>>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid cover tree JSON: ") + e.what());
  }
  for (const auto& node : tree.nodes) {
    if (node.point >= tree.n) throw ParseError("cover tree node point out of range");
    for (auto c : node.children) {
      if (c >= tree.nodes.size()) throw ParseError("cover tree child index out of range");
    }
  }
  return tree;
}

void save_cover_tree(const std::filesystem::path& path, const CoverTree& tree) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << tree.to_json() << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

CoverTree load_cover_tree(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return CoverTree::from_json(buffer.str());
}

}  // namespace bimetric
