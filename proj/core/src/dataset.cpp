#include "bimetric/dataset.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string_view>
#include <unordered_map>

#include "bimetric/seed.hpp"

static_assert(std::endian::native == std::endian::little,
              "fvecs I/O assumes a little-endian host");

namespace bimetric {

EmbeddingSet::EmbeddingSet(std::size_t dim, std::vector<float> values)
    : dim_(dim), values_(std::move(values)) {
  if (dim_ == 0 && !values_.empty()) {
    throw ParameterError("embedding set with dim 0 must be empty");
  }
  if (dim_ != 0 && values_.size() % dim_ != 0) {
    throw ParameterError("embedding values are not a multiple of dim " + std::to_string(dim_));
  }
  for (float v : values_) {
    if (!std::isfinite(v)) throw ParameterError("embedding contains a non-finite component");
  }
}

void BiMetricDataset::validate() const {
  if (!corpus_proxy || !corpus_truth || !queries_proxy || !queries_truth) {
    throw ConfigError("dataset '" + name + "' is missing an embedding set");
  }
  if (corpus_proxy->count() != corpus_truth->count()) {
    throw ConfigError("corpus proxy/truth counts differ: " + std::to_string(corpus_proxy->count()) +
                      " vs " + std::to_string(corpus_truth->count()));
  }
  if (queries_proxy->count() != queries_truth->count()) {
    throw ConfigError("query proxy/truth counts differ: " + std::to_string(queries_proxy->count()) +
                      " vs " + std::to_string(queries_truth->count()));
  }
  for (const auto& [qid, row] : qrels) {
    if (qid >= query_count()) {
      throw ConfigError("qrels query id " + std::to_string(qid) + " out of range");
    }
    for (const auto& [doc, grade] : row) {
      if (doc >= corpus_size()) {
        throw ConfigError("qrels doc id " + std::to_string(doc) + " out of range");
      }
    }
  }
}

namespace {

std::vector<std::byte> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::byte> bytes(size);
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size))) {
    throw IoError("failed reading " + path.string());
  }
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

EmbeddingSet parse_fvecs(std::span<const std::byte> bytes) {
  std::size_t offset = 0;
  std::int32_t dim = 0;
  std::vector<float> values;
  while (offset < bytes.size()) {
    if (bytes.size() - offset < sizeof(std::int32_t)) {
      throw FormatError("truncated record header at byte offset " + std::to_string(offset));
    }
    std::int32_t record_dim;
    std::memcpy(&record_dim, bytes.data() + offset, sizeof record_dim);
    if (record_dim <= 0) {
      throw FormatError("non-positive dim " + std::to_string(record_dim) + " at byte offset " +
                        std::to_string(offset));
    }
    if (dim == 0) {
      dim = record_dim;
    } else if (record_dim != dim) {
      throw FormatError("inconsistent dim at byte offset " + std::to_string(offset) + ": expected " +
                        std::to_string(dim) + ", found " + std::to_string(record_dim));
    }
    const std::size_t payload = static_cast<std::size_t>(dim) * sizeof(float);
    if (bytes.size() - offset - sizeof(std::int32_t) < payload) {
      throw FormatError("truncated record at byte offset " + std::to_string(offset));
    }
    const std::size_t start = values.size();
    values.resize(start + static_cast<std::size_t>(dim));
    std::memcpy(values.data() + start, bytes.data() + offset + sizeof(std::int32_t), payload);
    offset += sizeof(std::int32_t) + payload;
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw FormatError("non-finite component in record " + std::to_string(i / dim));
    }
  }
  return EmbeddingSet(static_cast<std::size_t>(dim), std::move(values));
}

std::vector<std::byte> serialize_fvecs(const EmbeddingSet& set) {
  const std::size_t dim = set.dim();
  std::vector<std::byte> bytes(set.count() * (sizeof(std::int32_t) + dim * sizeof(float)));
  std::byte* out = bytes.data();
  const auto dim32 = static_cast<std::int32_t>(dim);
  for (std::size_t i = 0; i < set.count(); ++i) {
    std::memcpy(out, &dim32, sizeof dim32);
    out += sizeof dim32;
    std::memcpy(out, set[i].data(), dim * sizeof(float));
    out += dim * sizeof(float);
  }
  return bytes;
}

EmbeddingSet load_fvecs(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return parse_fvecs(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_fvecs(const std::filesystem::path& path, const EmbeddingSet& set) {
  write_file(path, serialize_fvecs(set));
}

namespace {

long long parse_integer_field(std::string_view field, std::size_t line_no) {
  if (field.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty field");
  std::size_t pos = 0;
  bool negative = false;
  if (field[0] == '-' || field[0] == '+') {
    negative = field[0] == '-';
    pos = 1;
  }
  if (pos == field.size()) {
    throw ParseError("line " + std::to_string(line_no) + ": non-integer field '" +
                     std::string(field) + "'");
  }
  long long value = 0;
  for (; pos < field.size(); ++pos) {
    const char c = field[pos];
    if (c < '0' || c > '9') {
      throw ParseError("line " + std::to_string(line_no) + ": non-integer field '" +
                       std::string(field) + "'");
    }
    value = value * 10 + (c - '0');
    if (value > (1LL << 40)) {
      throw ParseError("line " + std::to_string(line_no) + ": integer out of range");
    }
  }
  return negative ? -value : value;
}

}  // namespace

Qrels parse_qrels(const std::string& text) {
  Qrels qrels;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (;;) {
      const auto tab = rest.find('\t');
      fields.push_back(rest.substr(0, tab));
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }
    if (fields.size() != 3) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 3 tab-separated fields, got " +
                       std::to_string(fields.size()));
    }
    const long long query = parse_integer_field(fields[0], line_no);
    const long long doc = parse_integer_field(fields[1], line_no);
    const long long grade = parse_integer_field(fields[2], line_no);
    if (query < 0 || doc < 0) {
      throw ParseError("line " + std::to_string(line_no) + ": negative id");
    }
    if (grade < 0) {
      throw ParseError("line " + std::to_string(line_no) + ": negative grade " +
                       std::to_string(grade));
    }
    auto& row = qrels[static_cast<std::uint32_t>(query)];
    auto [it, inserted] = row.emplace(static_cast<std::uint32_t>(doc), static_cast<int>(grade));
    if (!inserted) it->second = std::max(it->second, static_cast<int>(grade));
  }
  return qrels;
}

Qrels load_qrels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_qrels(buffer.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void save_qrels(const std::filesystem::path& path, const Qrels& qrels) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& [query, row] : qrels) {
    for (const auto& [doc, grade] : row) out << query << '\t' << doc << '\t' << grade << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<NodeId> DuplicateGroups::representatives() const {
  std::vector<NodeId> reps;
  for (NodeId i = 0; i < representative.size(); ++i) {
    if (representative[i] == i) reps.push_back(i);
  }
  return reps;
}

DuplicateGroups find_duplicates(const EmbeddingSet& set) {
  DuplicateGroups groups;
  const std::size_t n = set.count();
  groups.representative.resize(n);
  std::unordered_multimap<std::uint64_t, NodeId> by_hash;
  by_hash.reserve(n);
  for (NodeId i = 0; i < n; ++i) {
    const auto v = set[i];
    const std::uint64_t h = fnv1a64(v.data(), v.size_bytes());
    NodeId rep = i;
    auto [first, last] = by_hash.equal_range(h);
    for (auto it = first; it != last; ++it) {
      const auto other = set[it->second];
      if (std::memcmp(other.data(), v.data(), v.size_bytes()) == 0) {
        rep = it->second;
        break;
      }
    }
    groups.representative[i] = rep;
    if (rep == i) {
      by_hash.emplace(h, i);
    } else {
      groups.duplicates[rep].push_back(i);
    }
  }
  return groups;
}

}  // namespace bimetric
