#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace crygcn {

using Rng = std::mt19937_64;

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derives an independent stream seed from the run seed, a role tag
/// ("folds", "mask", "init", "dropout", ...) and an optional index such as a
/// fold number or epoch.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view role,
                                    std::uint64_t index = 0) noexcept {
  return mix64(mix64(seed ^ fnv1a(role)) + index);
}

}  // namespace crygcn
