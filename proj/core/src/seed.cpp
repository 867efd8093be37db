#include "bimetric/seed.hpp"

namespace bimetric {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t hash) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t child_seed(std::uint64_t parent, std::string_view label) {
  return splitmix64(fnv1a64(label.data(), label.size()) ^ splitmix64(parent));
}

std::uint64_t child_seed(std::uint64_t parent, std::string_view label, std::uint64_t index) {
  return splitmix64(child_seed(parent, label) + index);
}

}  // namespace bimetric
