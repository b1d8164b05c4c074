#pragma once

#include <cstdint>
#include <string_view>

namespace skillbench {

// FNV-1a, used wherever a seed or cache key must be stable across platforms
// (std::hash is not).
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace skillbench
