#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "bimetric/anngraph.hpp"
#include "bimetric/dataset.hpp"
#include "bimetric/metric.hpp"

namespace bimetric {

enum class Method : std::uint8_t { kBimetricOurs, kBimetricBaseline, kSingleMetric };

std::string to_string(Method method);
Method parse_method(const std::string& text);

struct MethodSpec {
  Method method = Method::kBimetricOurs;
  StartMode start_mode = StartMode::kHalfBudget;
  std::size_t fixed_starts = 100;
  std::size_t k = 10;

  // CSV method label, with the start mode appended for non-default ours runs.
  std::string label() const;
};

// Everything a method needs to answer queries on one dataset.
struct SearchContext {
  const BiMetricDataset* dataset = nullptr;
  DistanceOracle d;
  DistanceOracle D;
  const ReachabilityGraph* proxy_graph = nullptr;  // built under d
  const ReachabilityGraph* truth_graph = nullptr;  // built under D, single-metric only
  std::size_t stage1_beam = 5000;
  std::size_t stage2_beam = 0;
  bool memoize_D = true;
  BudgetPolicy policy = BudgetPolicy::kEnforce;
  unsigned threads = 1;
  // Restrict to these query ids; empty means all queries.
  std::vector<std::uint32_t> query_ids;

  static SearchContext for_dataset(const BiMetricDataset& dataset);
  std::vector<std::uint32_t> active_queries() const;
};

struct QueryOutcome {
  std::uint32_t query = 0;
  std::vector<NodeId> top_k;
  std::uint64_t calls_D = 0;
  std::uint64_t calls_d = 0;
};

// Runs one method at budget Q on every active query. Throws ParameterError if
// Q < k or the needed index is missing.
std::vector<QueryOutcome> run_method(const SearchContext& context, const MethodSpec& spec,
                                     std::uint64_t Q);

// Fraction of truth[..k] present in result[..k]. Throws if k > |truth|.
double recall_at_k(std::span<const NodeId> result, std::span<const NodeId> truth, std::size_t k);

// Exponential-gain NDCG with log2 discount; 0 when no document is relevant.
double ndcg_at_k(std::span<const NodeId> result, const std::map<std::uint32_t, int>& grades,
                 std::size_t k);

// Brute-force top-k under `D` for each query, ties by id.
using GroundTruth = std::vector<std::vector<Neighbor>>;
GroundTruth brute_force_truth(const DistanceOracle& D, std::size_t k, unsigned threads = 1);

// BMGT file: "BMGT", u32 n_queries, u32 k, then per query k (u32 id, f64 dist).
void save_truth(const std::filesystem::path& path, const GroundTruth& truth);
GroundTruth load_truth(const std::filesystem::path& path);
std::uint64_t dataset_hash(const BiMetricDataset& dataset, std::size_t k);
// Loads <dir>/truth-<hash>.bmgt if present, otherwise computes and writes it.
GroundTruth cached_truth(const BiMetricDataset& dataset, std::size_t k,
                         const std::filesystem::path& cache_dir, unsigned threads = 1);

struct SweepRow {
  std::string dataset;
  std::string method;
  std::string start_mode;
  std::uint64_t Q = 0;
  double ndcg_at_10 = 0.0;
  double recall_at_10 = 0.0;
  double mean_calls_D = 0.0;
  double mean_calls_d = 0.0;
  double wall_seconds = 0.0;
  std::uint64_t max_calls_D = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;

  static constexpr const char* kCsvHeader =
      "dataset,method,Q,ndcg_at_10,recall_at_10,mean_calls_D,mean_calls_d,wall_seconds";

  // with_start_mode appends a start_mode column (ablation output).
  void write_csv(std::ostream& out, bool with_start_mode = false) const;
  void write_csv(const std::filesystem::path& path, bool with_start_mode = false) const;
};

// Aggregates per-query outcomes of one (method, Q) cell into a row.
SweepRow summarize(const std::string& dataset, const MethodSpec& spec, std::uint64_t Q,
                   std::span<const QueryOutcome> outcomes, const GroundTruth& truth,
                   const Qrels& qrels, double wall_seconds);

// One prepared instance of a sweep: a context plus its ground truth.
struct SweepInstance {
  std::string tag;
  SearchContext context;
  GroundTruth truth;
};

struct SweepOptions {
  bool record_wall_clock = true;
  // Called after each cell with the per-query outcomes (for audits).
  std::function<void(const SweepRow&, std::span<const QueryOutcome>)> on_cell;
};

// Runs every (instance, method, Q) cell; budgets must be ascending.
SweepResult sweep(std::span<const SweepInstance> instances, std::span<const MethodSpec> methods,
                  std::span<const std::uint64_t> budgets, const SweepOptions& options = {});

}  // namespace bimetric
