#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace bimetric {

using NodeId = std::uint32_t;

// Identifies one side of a distance evaluation: a corpus point or a query.
struct Endpoint {
  enum class Side : std::uint8_t { kCorpus, kQuery };

  Side side = Side::kCorpus;
  std::uint32_t index = 0;

  static constexpr Endpoint corpus(std::uint32_t i) { return {Side::kCorpus, i}; }
  static constexpr Endpoint query(std::uint32_t i) { return {Side::kQuery, i}; }

  bool is_query() const { return side == Side::kQuery; }
  auto operator<=>(const Endpoint&) const = default;
};

// A point id paired with its distance to some query. Ordered by distance,
// then by id, which is the tie-break rule used everywhere in the library.
struct Neighbor {
  NodeId id = 0;
  double distance = 0.0;

  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
  }
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed binary input (fvecs, BMAG, BMGT).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Malformed text input (qrels, JSON, config).
class ParseError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class StatsError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace bimetric
