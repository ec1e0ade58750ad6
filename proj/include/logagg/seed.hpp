#pragma once

#include <cstdint>
#include <initializer_list>

namespace logagg {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Counter-based child seed: each (master, path...) tuple gets its own stream,
// so adding a new stage never shifts the seeds handed to existing ones.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t component : path) h = splitmix64(h ^ splitmix64(component + 0x632BE59BD9B4E019ULL));
  return h;
}

// Stage tags used when deriving seeds from a master seed.
namespace stage {
inline constexpr std::uint64_t split = 1;
inline constexpr std::uint64_t cross_validation = 2;
inline constexpr std::uint64_t mcmc = 3;
inline constexpr std::uint64_t covariates = 4;
inline constexpr std::uint64_t response = 5;
inline constexpr std::uint64_t test_covariates = 6;
inline constexpr std::uint64_t test_response = 7;
inline constexpr std::uint64_t replication = 8;
}  // namespace stage

}  // namespace logagg
