#include "bimetric/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>

#include "bimetric/parallel.hpp"
#include "bimetric/seed.hpp"

namespace bimetric {

std::string to_string(Method method) {
  switch (method) {
    case Method::kBimetricOurs: return "bimetric-ours";
    case Method::kBimetricBaseline: return "bimetric-baseline";
    case Method::kSingleMetric: return "single-metric";
  }
  return "unknown";
}

Method parse_method(const std::string& text) {
  if (text == "bimetric-ours") return Method::kBimetricOurs;
  if (text == "bimetric-baseline") return Method::kBimetricBaseline;
  if (text == "single-metric") return Method::kSingleMetric;
  throw ParameterError("unknown method '" + text + "'");
}

namespace {

std::string start_label(const MethodSpec& spec) {
  if (spec.method != Method::kBimetricOurs) return "-";
  switch (spec.start_mode) {
    case StartMode::kHalfBudget: return "top-Q/2";
    case StartMode::kFixed: return "top-" + std::to_string(spec.fixed_starts);
    case StartMode::kDefaultEntry: return "default";
  }
  return "-";
}

}  // namespace

std::string MethodSpec::label() const {
  if (method == Method::kBimetricOurs && start_mode != StartMode::kHalfBudget) {
    return to_string(method) + "[" + start_label(*this) + "]";
  }
  return to_string(method);
}

SearchContext SearchContext::for_dataset(const BiMetricDataset& dataset) {
  SearchContext context;
  context.dataset = &dataset;
  context.d = DistanceOracle(MetricKind::kProxy, dataset.corpus_proxy, dataset.queries_proxy);
  context.D = DistanceOracle(MetricKind::kTruth, dataset.corpus_truth, dataset.queries_truth);
  context.stage1_beam = default_stage1_beam(dataset.corpus_size());
  return context;
}

std::vector<std::uint32_t> SearchContext::active_queries() const {
  if (!query_ids.empty()) return query_ids;
  std::vector<std::uint32_t> all(d.query_count());
  std::iota(all.begin(), all.end(), 0);
  return all;
}

namespace {

QueryOutcome run_one(const SearchContext& context, const MethodSpec& spec, std::uint64_t Q,
                     std::uint32_t q) {
  QueryOutcome outcome;
  outcome.query = q;
  const Endpoint query = Endpoint::query(q);
  CountingOracle D(context.D, {Q, context.memoize_D, context.policy});
  std::vector<Neighbor> top;

  switch (spec.method) {
    case Method::kBimetricOurs: {
      TwoStageParams params;
      params.budget = Q;
      params.k = spec.k;
      params.start_mode = spec.start_mode;
      params.fixed_starts = spec.fixed_starts;
      params.stage1_beam = context.stage1_beam;
      params.stage2_beam = context.stage2_beam;
      auto result = two_stage_search(*context.proxy_graph, context.d, D, query, params);
      top = std::move(result.top_k);
      outcome.calls_d = result.calls_d;
      break;
    }
    case Method::kBimetricBaseline: {
      CountingOracle proxy(context.d);
      const auto candidates =
          first_stage_candidates(*context.proxy_graph, proxy, query, Q, context.stage1_beam);
      outcome.calls_d = proxy.calls();
      for (const auto& c : candidates) {
        try {
          top.push_back({c.id, D.distance(query, c.id)});
        } catch (const BudgetExhausted&) {
          break;
        }
      }
      std::sort(top.begin(), top.end());
      if (top.size() > spec.k) top.resize(spec.k);
      break;
    }
    case Method::kSingleMetric: {
      const NodeId start = context.truth_graph->start_node;
      const auto trace = greedy_search(*context.truth_graph, D, query, std::span(&start, 1),
                                       std::max<std::uint64_t>(Q, spec.k));
      top.assign(trace.seen.begin(),
                 trace.seen.begin() + static_cast<std::ptrdiff_t>(std::min(trace.seen.size(), spec.k)));
      break;
    }
  }
  outcome.calls_D = D.calls();
  outcome.top_k.reserve(top.size());
  for (const auto& nb : top) outcome.top_k.push_back(nb.id);
  return outcome;
}

}  // namespace

std::vector<QueryOutcome> run_method(const SearchContext& context, const MethodSpec& spec,
                                     std::uint64_t Q) {
  if (spec.k == 0) throw ParameterError("k must be positive");
  if (Q < spec.k) {
    throw ParameterError("budget Q=" + std::to_string(Q) + " is smaller than k=" + std::to_string(spec.k));
  }
  if (spec.method == Method::kSingleMetric) {
    if (context.truth_graph == nullptr) throw ParameterError("single-metric needs a graph built under D");
    if (context.truth_graph->n != context.D.corpus_size()) throw ConfigError("truth graph does not match the dataset");
  } else {
    if (context.proxy_graph == nullptr) throw ParameterError(to_string(spec.method) + " needs a graph built under d");
    if (context.proxy_graph->n != context.d.corpus_size()) throw ConfigError("proxy graph does not match the dataset");
  }
  const auto queries = context.active_queries();
  std::vector<QueryOutcome> outcomes(queries.size());
  parallel_for(queries.size(), context.threads,
               [&](std::size_t i) { outcomes[i] = run_one(context, spec, Q, queries[i]); });
  return outcomes;
}

double recall_at_k(std::span<const NodeId> result, std::span<const NodeId> truth, std::size_t k) {
  if (k == 0) throw ParameterError("k must be positive");
  if (k > truth.size()) {
    throw ParameterError("k=" + std::to_string(k) + " exceeds ground truth size " + std::to_string(truth.size()));
  }
  const std::set<NodeId> wanted(truth.begin(), truth.begin() + static_cast<std::ptrdiff_t>(k));
  std::set<NodeId> found;
  for (std::size_t i = 0; i < std::min(k, result.size()); ++i) {
    if (wanted.count(result[i])) found.insert(result[i]);
  }
  return static_cast<double>(found.size()) / static_cast<double>(k);
}

double ndcg_at_k(std::span<const NodeId> result, const std::map<std::uint32_t, int>& grades,
                 std::size_t k) {
  if (k == 0) throw ParameterError("k must be positive");
  auto gain = [](int grade) { return std::exp2(static_cast<double>(grade)) - 1.0; };
  double dcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, result.size()); ++i) {
    auto it = grades.find(result[i]);
    if (it != grades.end()) dcg += gain(it->second) / std::log2(static_cast<double>(i) + 2.0);
  }
  std::vector<int> ideal;
  ideal.reserve(grades.size());
  for (const auto& [doc, grade] : grades) ideal.push_back(grade);
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i) {
    idcg += gain(ideal[i]) / std::log2(static_cast<double>(i) + 2.0);
  }
  return idcg == 0.0 ? 0.0 : dcg / idcg;
}

GroundTruth brute_force_truth(const DistanceOracle& D, std::size_t k, unsigned threads) {
  const std::size_t n = D.corpus_size();
  k = std::min(k, n);
  GroundTruth truth(D.query_count());
  parallel_for(truth.size(), threads, [&](std::size_t q) {
    std::vector<Neighbor> all(n);
    for (NodeId v = 0; v < n; ++v) {
      all[v] = {v, D.distance(Endpoint::query(static_cast<std::uint32_t>(q)), v)};
    }
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
    all.resize(k);
    truth[q] = std::move(all);
  });
  return truth;
}

namespace {

constexpr char kTruthMagic[4] = {'B', 'M', 'G', 'T'};

}  // namespace

void save_truth(const std::filesystem::path& path, const GroundTruth& truth) {
  const std::uint32_t k = truth.empty() ? 0 : static_cast<std::uint32_t>(truth.front().size());
  for (const auto& row : truth) {
    if (row.size() != k) throw ParameterError("ground truth rows differ in length");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const auto n_queries = static_cast<std::uint32_t>(truth.size());
  out.write(kTruthMagic, 4);
  out.write(reinterpret_cast<const char*>(&n_queries), sizeof n_queries);
  out.write(reinterpret_cast<const char*>(&k), sizeof k);
  for (const auto& row : truth) {
    for (const auto& nb : row) {
      out.write(reinterpret_cast<const char*>(&nb.id), sizeof nb.id);
      out.write(reinterpret_cast<const char*>(&nb.distance), sizeof nb.distance);
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

GroundTruth load_truth(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  std::uint32_t n_queries = 0, k = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&n_queries), sizeof n_queries);
  in.read(reinterpret_cast<char*>(&k), sizeof k);
  if (!in || std::memcmp(magic, kTruthMagic, 4) != 0) {
    throw FormatError(path.string() + ": not a BMGT ground-truth file");
  }
  GroundTruth truth(n_queries, std::vector<Neighbor>(k));
  for (auto& row : truth) {
    for (auto& nb : row) {
      in.read(reinterpret_cast<char*>(&nb.id), sizeof nb.id);
      in.read(reinterpret_cast<char*>(&nb.distance), sizeof nb.distance);
    }
  }
  if (!in) throw FormatError(path.string() + ": truncated BMGT file");
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(path.string() + ": trailing bytes in BMGT file");
  return truth;
}

std::uint64_t dataset_hash(const BiMetricDataset& dataset, std::size_t k) {
  std::uint64_t h = fnv1a64(&k, sizeof k);
  for (const auto* set : {dataset.corpus_truth.get(), dataset.queries_truth.get()}) {
    const std::uint64_t dim = set->dim();
    h = fnv1a64(&dim, sizeof dim, h);
    h = fnv1a64(set->values().data(), set->values().size_bytes(), h);
  }
  return h;
}

GroundTruth cached_truth(const BiMetricDataset& dataset, std::size_t k,
                         const std::filesystem::path& cache_dir, unsigned threads) {
  char name[40];
  std::snprintf(name, sizeof name, "truth-%016llx.bmgt",
                static_cast<unsigned long long>(dataset_hash(dataset, k)));
  const auto path = cache_dir / name;
  if (std::filesystem::exists(path)) {
    auto truth = load_truth(path);
    if (truth.size() == dataset.query_count()) return truth;
  }
  const DistanceOracle D(MetricKind::kTruth, dataset.corpus_truth, dataset.queries_truth);
  auto truth = brute_force_truth(D, k, threads);
  std::filesystem::create_directories(cache_dir);
  save_truth(path, truth);
  return truth;
}

void SweepResult::write_csv(std::ostream& out, bool with_start_mode) const {
  out << kCsvHeader << (with_start_mode ? ",start_mode" : "") << '\n';
  char buffer[256];
  for (const auto& row : rows) {
    std::snprintf(buffer, sizeof buffer, "%llu,%.6f,%.6f,%.3f,%.3f,%.3f",
                  static_cast<unsigned long long>(row.Q), row.ndcg_at_10, row.recall_at_10,
                  row.mean_calls_D, row.mean_calls_d, row.wall_seconds);
    out << row.dataset << ',' << row.method << ',' << buffer;
    if (with_start_mode) out << ',' << row.start_mode;
    out << '\n';
  }
}

void SweepResult::write_csv(const std::filesystem::path& path, bool with_start_mode) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_csv(out, with_start_mode);
  if (!out) throw IoError("failed writing " + path.string());
}

SweepRow summarize(const std::string& dataset, const MethodSpec& spec, std::uint64_t Q,
                   std::span<const QueryOutcome> outcomes, const GroundTruth& truth,
                   const Qrels& qrels, double wall_seconds) {
  SweepRow row;
  row.dataset = dataset;
  row.method = spec.label();
  row.start_mode = start_label(spec);
  row.Q = Q;
  row.wall_seconds = wall_seconds;
  if (outcomes.empty()) return row;
  static const std::map<std::uint32_t, int> kNoGrades;
  double ndcg = 0.0, recall = 0.0, calls_D = 0.0, calls_d = 0.0;
  for (const auto& outcome : outcomes) {
    if (outcome.query >= truth.size()) throw ConfigError("ground truth is missing query " + std::to_string(outcome.query));
    std::vector<NodeId> truth_ids;
    for (const auto& nb : truth[outcome.query]) truth_ids.push_back(nb.id);
    const std::size_t k = std::min<std::size_t>(10, truth_ids.size());
    recall += recall_at_k(outcome.top_k, truth_ids, k);
    auto it = qrels.find(outcome.query);
    ndcg += ndcg_at_k(outcome.top_k, it == qrels.end() ? kNoGrades : it->second, 10);
    calls_D += static_cast<double>(outcome.calls_D);
    calls_d += static_cast<double>(outcome.calls_d);
    row.max_calls_D = std::max(row.max_calls_D, outcome.calls_D);
  }
  const auto count = static_cast<double>(outcomes.size());
  row.ndcg_at_10 = ndcg / count;
  row.recall_at_10 = recall / count;
  row.mean_calls_D = calls_D / count;
  row.mean_calls_d = calls_d / count;
  return row;
}

SweepResult sweep(std::span<const SweepInstance> instances, std::span<const MethodSpec> methods,
                  std::span<const std::uint64_t> budgets, const SweepOptions& options) {
  if (!std::is_sorted(budgets.begin(), budgets.end())) {
    throw ParameterError("budgets must be ascending");
  }
  SweepResult result;
  for (const auto& instance : instances) {
    if (instance.context.dataset == nullptr) throw ConfigError("sweep instance without a dataset");
    if (instance.truth.size() != instance.context.dataset->query_count()) {
      throw ConfigError("ground truth of '" + instance.tag + "' does not match its query set");
    }
    for (const auto& spec : methods) {
      for (std::uint64_t Q : budgets) {
        const auto start = std::chrono::steady_clock::now();
        const auto outcomes = run_method(instance.context, spec, Q);
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        auto row = summarize(instance.tag, spec, Q, outcomes, instance.truth,
                             instance.context.dataset->qrels,
                             options.record_wall_clock ? wall : 0.0);
        if (options.on_cell) options.on_cell(row, outcomes);
        result.rows.push_back(std::move(row));
      }
    }
  }
  return result;
}

}  // namespace bimetric
