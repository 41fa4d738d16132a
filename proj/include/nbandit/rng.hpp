#pragma once

#include <cstdint>
#include <random>

namespace nbandit {

using Rng = std::mt19937_64;

/// One splitmix64 output step. Used to decorrelate user-supplied seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of child stream `stream` under `parent`. Children of the same parent
/// with different tags are independent; the mapping has no hidden state.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream) {
  return splitmix64(splitmix64(parent) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

// Stream tags shared by the environment and policies.
namespace streams {
inline constexpr std::uint64_t kContexts = 1;
inline constexpr std::uint64_t kNoise = 2;
inline constexpr std::uint64_t kProblem = 3;
inline constexpr std::uint64_t kShuffle = 4;
inline constexpr std::uint64_t kInit = 5;
inline constexpr std::uint64_t kPolicy = 6;
}  // namespace streams

}  // namespace nbandit
