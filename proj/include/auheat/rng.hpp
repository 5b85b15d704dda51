#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace auheat {

// splitmix64 step; good avalanche, cheap.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derive an independent stream seed from a base seed and a list of tags
// (subject index, frame index, purpose hash, ...). Order-sensitive.
inline std::uint64_t mix_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = splitmix64(base);
  for (std::uint64_t t : tags) s = splitmix64(s ^ splitmix64(t));
  return s;
}

inline std::uint64_t tag(std::string_view name) {
  // FNV-1a, used only to turn purpose strings into tag constants.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

using RngEngine = std::mt19937_64;

inline RngEngine make_engine(std::uint64_t base, std::initializer_list<std::uint64_t> tags = {}) {
  return RngEngine(mix_seed(base, tags));
}

}  // namespace auheat
