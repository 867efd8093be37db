#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "bimetric/dataset.hpp"
#include "bimetric/types.hpp"

namespace bimetric {

enum class MetricKind : std::uint8_t { kProxy, kTruth };

std::string to_string(MetricKind kind);

// Euclidean distance accumulated in double precision. The summation order is
// fixed by coordinate index, so dist(a, b) == dist(b, a) bit for bit.
double euclidean(std::span<const float> a, std::span<const float> b);

// Immutable Euclidean distance over a corpus and (optionally) a query set.
// `scale` multiplies every returned distance.
class DistanceOracle {
 public:
  DistanceOracle() = default;
  DistanceOracle(MetricKind kind, EmbeddingSetPtr corpus, EmbeddingSetPtr queries = nullptr,
                 double scale = 1.0);

  MetricKind kind() const { return kind_; }
  double scale() const { return scale_; }
  std::size_t corpus_size() const { return corpus_ ? corpus_->count() : 0; }
  std::size_t query_count() const { return queries_ ? queries_->count() : 0; }
  const EmbeddingSetPtr& corpus() const { return corpus_; }
  const EmbeddingSetPtr& queries() const { return queries_; }

  // Throws std::out_of_range on bad ids.
  double distance(Endpoint a, NodeId b) const;
  double between(NodeId a, NodeId b) const { return distance(Endpoint::corpus(a), b); }
  std::span<const float> vector(Endpoint e) const;

  // Same spaces, distances multiplied by `factor` on top of the current scale.
  DistanceOracle scaled(double factor) const;

 private:
  MetricKind kind_ = MetricKind::kProxy;
  EmbeddingSetPtr corpus_;
  EmbeddingSetPtr queries_;
  double scale_ = 1.0;
};

class BudgetExhausted : public Error {
 public:
  explicit BudgetExhausted(std::uint64_t calls);
  std::uint64_t calls() const { return calls_; }

 private:
  std::uint64_t calls_;
};

// kRecordOnly disables the budget check while still counting. It exists so
// the test suite can prove that the budget ceiling assertions catch a missing
// check; nothing else should use it.
enum class BudgetPolicy : std::uint8_t { kEnforce, kRecordOnly };

struct CountingOptions {
  std::optional<std::uint64_t> budget;
  bool memoize = false;
  BudgetPolicy policy = BudgetPolicy::kEnforce;
};

// Wraps a DistanceOracle, counting evaluations and enforcing a call budget.
// With memoization on, a repeated (a, b) pair is served from the memo and not
// counted again. All methods are safe to call concurrently.
class CountingOracle {
 public:
  explicit CountingOracle(DistanceOracle inner, CountingOptions options = {});

  CountingOracle(const CountingOracle&) = delete;
  CountingOracle& operator=(const CountingOracle&) = delete;

  // Throws BudgetExhausted when a new evaluation would exceed the budget.
  double distance(Endpoint a, NodeId b);

  const DistanceOracle& inner() const { return inner_; }
  MetricKind kind() const { return inner_.kind(); }
  std::optional<std::uint64_t> budget() const { return options_.budget; }
  bool memoized() const { return options_.memoize; }
  std::uint64_t calls() const;
  // True once no further new evaluation is allowed.
  bool exhausted() const;
  void reset();

 private:
  static std::uint64_t memo_key(Endpoint a, NodeId b);

  DistanceOracle inner_;
  CountingOptions options_;
  mutable std::mutex mutex_;
  std::uint64_t calls_ = 0;
  std::unordered_map<std::uint64_t, double> memo_;
};

// Which corpus pairs a check should visit.
struct PairSelection {
  // nullopt: all i < j pairs. Otherwise this many uniform random pairs.
  std::optional<std::size_t> sample;
  std::uint64_t seed = 0;

  static PairSelection exhaustive() { return {}; }
  static PairSelection sampled(std::size_t count, std::uint64_t seed) { return {count, seed}; }
};

std::vector<std::pair<NodeId, NodeId>> select_pairs(std::size_t n, const PairSelection& selection);

struct ApproxViolation {
  NodeId x = 0;
  NodeId y = 0;
  double d_value = 0.0;
  double D_value = 0.0;
};

struct ApproxReport {
  double c_tested = 1.0;
  // Factor needed for the sandwich to hold after the best rescale of d;
  // +inf if some pair has d == 0 < D.
  double c_required = 1.0;
  std::vector<ApproxViolation> violations;  // first max_recorded only
  std::size_t violation_count = 0;
  std::size_t pairs_checked = 0;

  bool ok() const { return violation_count == 0; }
  std::string to_json() const;
};

// Checks d(x,y) <= D(x,y) <= C * d(x,y) over the selected corpus pairs.
ApproxReport validate_c_approx(const DistanceOracle& d, const DistanceOracle& D, double C,
                               const PairSelection& pairs, std::size_t max_recorded = 1000);

struct ProxyRescale {
  double scale = 1.0;  // multiply d by this so that scale * d <= D
  double c_hat = 1.0;  // max(D/d) / min(D/d)
};

// Throws ParameterError if no selected pair has nonzero d.
ProxyRescale rescale_proxy(const DistanceOracle& d, const DistanceOracle& D,
                           const PairSelection& pairs);

// Same as rescale_proxy but also over every (query, corpus) pair; used where
// search guarantees need the sandwich to hold for queries as well.
ProxyRescale rescale_proxy_with_queries(const DistanceOracle& d, const DistanceOracle& D);

}  // namespace bimetric
