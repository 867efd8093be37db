#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bimetric/types.hpp"

namespace bimetric {

// Dense row-major set of float32 vectors sharing one dimension.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  EmbeddingSet(std::size_t dim, std::vector<float> values);

  std::size_t dim() const { return dim_; }
  std::size_t count() const { return dim_ == 0 ? 0 : values_.size() / dim_; }
  bool empty() const { return count() == 0; }

  std::span<const float> operator[](std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  std::span<const float> values() const { return values_; }

  friend bool operator==(const EmbeddingSet&, const EmbeddingSet&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<float> values_;
};

using EmbeddingSetPtr = std::shared_ptr<const EmbeddingSet>;

// query id -> doc id -> grade
using Qrels = std::map<std::uint32_t, std::map<std::uint32_t, int>>;

// Corpus and queries embedded by two models: the cheap proxy and the
// expensive ground truth. The two spaces may have different dimensions.
struct BiMetricDataset {
  std::string name;
  EmbeddingSetPtr corpus_proxy;
  EmbeddingSetPtr corpus_truth;
  EmbeddingSetPtr queries_proxy;
  EmbeddingSetPtr queries_truth;
  Qrels qrels;

  std::size_t corpus_size() const { return corpus_proxy ? corpus_proxy->count() : 0; }
  std::size_t query_count() const { return queries_proxy ? queries_proxy->count() : 0; }

  // Throws ConfigError if counts disagree or qrels reference missing ids.
  void validate() const;
};

EmbeddingSet load_fvecs(const std::filesystem::path& path);
void save_fvecs(const std::filesystem::path& path, const EmbeddingSet& set);

// In-memory variants used by the file functions; offsets in errors are
// relative to the start of the buffer.
EmbeddingSet parse_fvecs(std::span<const std::byte> bytes);
std::vector<std::byte> serialize_fvecs(const EmbeddingSet& set);

Qrels load_qrels(const std::filesystem::path& path);
Qrels parse_qrels(const std::string& text);
void save_qrels(const std::filesystem::path& path, const Qrels& qrels);

// Groups of bit-identical vectors. representative[i] is the smallest id with
// the same vector as i; duplicates[r] lists the other members of r's group.
struct DuplicateGroups {
  std::vector<NodeId> representative;
  std::map<NodeId, std::vector<NodeId>> duplicates;

  bool has_duplicates() const { return !duplicates.empty(); }
  std::vector<NodeId> representatives() const;
};

DuplicateGroups find_duplicates(const EmbeddingSet& set);

struct DatasetStats {
  std::size_t n = 0;
  double delta_d = 1.0;
  double lambda_d_estimate = 0.0;
  double c_hat = 1.0;
  bool exact = true;

  std::string to_json() const;
};

struct StatsOptions {
  std::size_t sample_pairs = 100000;
  std::size_t packing_centers = 32;
  std::uint64_t seed = 0;
  // Exhaustive pairwise stats up to this many points.
  std::size_t exact_threshold = 2000;
};

// Aspect ratio and doubling-dimension estimate of `points`. When `truth` is
// given, c_hat is the ratio bound between the two spaces on the same pairs.
DatasetStats compute_stats(const EmbeddingSet& points, const StatsOptions& options = {},
                           const EmbeddingSet* truth = nullptr);

}  // namespace bimetric
