#include "bimetric/metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "bimetric/seed.hpp"
#include "json.hpp"

namespace bimetric {

std::string to_string(MetricKind kind) { return kind == MetricKind::kProxy ? "proxy" : "truth"; }

double euclidean(std::span<const float> a, std::span<const float> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

DistanceOracle::DistanceOracle(MetricKind kind, EmbeddingSetPtr corpus, EmbeddingSetPtr queries,
                               double scale)
    : kind_(kind), corpus_(std::move(corpus)), queries_(std::move(queries)), scale_(scale) {
  if (!corpus_) throw ParameterError("distance oracle needs a corpus");
  if (queries_ && !queries_->empty() && !corpus_->empty() && queries_->dim() != corpus_->dim()) {
    throw ParameterError("query dim " + std::to_string(queries_->dim()) + " differs from corpus dim " +
                         std::to_string(corpus_->dim()));
  }
  if (!(scale_ > 0.0) || !std::isfinite(scale_)) throw ParameterError("oracle scale must be positive");
}

std::span<const float> DistanceOracle::vector(Endpoint e) const {
  if (e.is_query()) {
    if (!queries_ || e.index >= queries_->count()) {
      throw std::out_of_range("query id " + std::to_string(e.index) + " out of range");
    }
    return (*queries_)[e.index];
  }
  if (e.index >= corpus_size()) {
    throw std::out_of_range("point id " + std::to_string(e.index) + " out of range");
  }
  return (*corpus_)[e.index];
}

double DistanceOracle::distance(Endpoint a, NodeId b) const {
  return scale_ * euclidean(vector(a), vector(Endpoint::corpus(b)));
}

DistanceOracle DistanceOracle::scaled(double factor) const {
  return DistanceOracle(kind_, corpus_, queries_, scale_ * factor);
}

BudgetExhausted::BudgetExhausted(std::uint64_t calls)
    : Error("distance budget exhausted after " + std::to_string(calls) + " calls"), calls_(calls) {}

CountingOracle::CountingOracle(DistanceOracle inner, CountingOptions options)
    : inner_(std::move(inner)), options_(options) {}

std::uint64_t CountingOracle::memo_key(Endpoint a, NodeId b) {
  std::uint64_t first = a.index;
  std::uint64_t second = b;
  // Corpus-corpus distances are symmetric; share one memo slot.
  if (!a.is_query() && first > second) std::swap(first, second);
  const std::uint64_t side = a.is_query() ? 1 : 0;
  return (side << 63) | (first << 32) | second;
}

double CountingOracle::distance(Endpoint a, NodeId b) {
  // Range errors surface before any accounting.
  inner_.vector(a);
  inner_.vector(Endpoint::corpus(b));

  // The check, the increment and the memo insert form one atomic unit.
  std::lock_guard lock(mutex_);
  std::uint64_t key = 0;
  if (options_.memoize) {
    key = memo_key(a, b);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  }
  if (options_.budget && options_.policy == BudgetPolicy::kEnforce && calls_ >= *options_.budget) {
    throw BudgetExhausted(calls_);
  }
  ++calls_;
  const double value = inner_.distance(a, b);
  if (options_.memoize) memo_.emplace(key, value);
  return value;
}

std::uint64_t CountingOracle::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

bool CountingOracle::exhausted() const {
  std::lock_guard lock(mutex_);
  return options_.budget && options_.policy == BudgetPolicy::kEnforce &&
         calls_ >= *options_.budget;
}

void CountingOracle::reset() {
  std::lock_guard lock(mutex_);
  calls_ = 0;
  memo_.clear();
}

std::vector<std::pair<NodeId, NodeId>> select_pairs(std::size_t n, const PairSelection& selection) {
  std::vector<std::pair<NodeId, NodeId>> pairs;
  if (n < 2) return pairs;
  if (!selection.sample) {
    pairs.reserve(n * (n - 1) / 2);
    for (NodeId a = 0; a < n; ++a) {
      for (NodeId b = a + 1; b < n; ++b) pairs.emplace_back(a, b);
    }
    return pairs;
  }
  std::mt19937_64 rng(selection.seed);
  std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(n - 1));
  pairs.reserve(*selection.sample);
  while (pairs.size() < *selection.sample) {
    NodeId a = pick(rng);
    NodeId b = pick(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    pairs.emplace_back(a, b);
  }
  return pairs;
}

namespace {

void require_paired(const DistanceOracle& d, const DistanceOracle& D) {
  if (d.corpus_size() != D.corpus_size()) {
    throw ParameterError("proxy and truth corpora differ in size: " +
                         std::to_string(d.corpus_size()) + " vs " + std::to_string(D.corpus_size()));
  }
}

}  // namespace

std::string ApproxReport::to_json() const {
  nlohmann::json violations_json = nlohmann::json::array();
  for (const auto& v : violations) {
    violations_json.push_back({{"x", v.x}, {"y", v.y}, {"d", v.d_value}, {"D", v.D_value}});
  }
  nlohmann::json j = {{"c_tested", c_tested},
                      {"c_required", std::isfinite(c_required) ? nlohmann::json(c_required)
                                                               : nlohmann::json("inf")},
                      {"pairs_checked", pairs_checked},
                      {"violation_count", violation_count},
                      {"violations", violations_json},
                      {"ok", ok()}};
  return j.dump();
}

ApproxReport validate_c_approx(const DistanceOracle& d, const DistanceOracle& D, double C,
                               const PairSelection& selection, std::size_t max_recorded) {
  if (!(C >= 1.0)) throw ParameterError("C must be at least 1");
  require_paired(d, D);

  ApproxReport report;
  report.c_tested = C;
  double min_ratio = std::numeric_limits<double>::infinity();
  double max_ratio = 0.0;
  bool infinite = false;
  for (const auto& [x, y] : select_pairs(d.corpus_size(), selection)) {
    const double dv = d.between(x, y);
    const double Dv = D.between(x, y);
    ++report.pairs_checked;
    if (dv > 0.0) {
      const double ratio = Dv / dv;
      min_ratio = std::min(min_ratio, ratio);
      max_ratio = std::max(max_ratio, ratio);
    } else if (Dv > 0.0) {
      infinite = true;
    }
    if (dv > Dv || Dv > C * dv) {
      if (report.violations.size() < max_recorded) report.violations.push_back({x, y, dv, Dv});
      ++report.violation_count;
    }
  }
  if (infinite) {
    report.c_required = std::numeric_limits<double>::infinity();
  } else if (max_ratio > 0.0) {
    report.c_required = std::max(1.0, max_ratio / std::min(1.0, min_ratio));
  }
  return report;
}

namespace {

ProxyRescale finish_rescale(double min_ratio, double max_ratio) {
  if (!std::isfinite(min_ratio)) {
    throw ParameterError("no sampled pair has a nonzero proxy distance");
  }
  if (!(min_ratio > 0.0)) throw ParameterError("a pair has zero truth distance but nonzero proxy distance");
  return {min_ratio, max_ratio / min_ratio};
}

}  // namespace

ProxyRescale rescale_proxy(const DistanceOracle& d, const DistanceOracle& D,
                           const PairSelection& selection) {
  require_paired(d, D);
  double min_ratio = std::numeric_limits<double>::infinity();
  double max_ratio = 0.0;
  for (const auto& [x, y] : select_pairs(d.corpus_size(), selection)) {
    const double dv = d.between(x, y);
    if (dv == 0.0) continue;
    const double ratio = D.between(x, y) / dv;
    min_ratio = std::min(min_ratio, ratio);
    max_ratio = std::max(max_ratio, ratio);
  }
  return finish_rescale(min_ratio, max_ratio);
}

ProxyRescale rescale_proxy_with_queries(const DistanceOracle& d, const DistanceOracle& D) {
  require_paired(d, D);
  if (d.query_count() != D.query_count()) throw ParameterError("query counts differ");
  double min_ratio = std::numeric_limits<double>::infinity();
  double max_ratio = 0.0;
  auto visit = [&](Endpoint a, NodeId b) {
    const double dv = d.distance(a, b);
    if (dv == 0.0) return;
    const double ratio = D.distance(a, b) / dv;
    min_ratio = std::min(min_ratio, ratio);
    max_ratio = std::max(max_ratio, ratio);
  };
  const auto n = static_cast<NodeId>(d.corpus_size());
  for (NodeId a = 0; a < n; ++a) {
    for (NodeId b = a + 1; b < n; ++b) visit(Endpoint::corpus(a), b);
  }
  for (std::uint32_t q = 0; q < d.query_count(); ++q) {
    for (NodeId b = 0; b < n; ++b) visit(Endpoint::query(q), b);
  }
  return finish_rescale(min_ratio, max_ratio);
}

}  // namespace bimetric
