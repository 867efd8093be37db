#pragma once

#include <cstdint>
#include <string_view>

namespace bimetric {

// Derives an independent child seed from a parent seed and a label, so new
// consumers of randomness never shift the streams of existing ones.
std::uint64_t child_seed(std::uint64_t parent, std::string_view label);
std::uint64_t child_seed(std::uint64_t parent, std::string_view label, std::uint64_t index);

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t hash = 0xcbf29ce484222325ULL);

}  // namespace bimetric
