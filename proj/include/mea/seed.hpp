#pragma once

#include <cstdint>
#include <initializer_list>

namespace mea {

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derive an independent stream seed from a master seed and a path of tags.
constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::initializer_list<std::uint64_t> tags) noexcept {
  std::uint64_t s = mix64(master);
  for (auto t : tags) s = mix64(s ^ mix64(t + 0x632be59bd9b4e019ULL));
  return s;
}

// Tags for the stream hierarchy.
enum SeedTag : std::uint64_t {
  kTagReplicate = 1,
  kTagDay = 2,
  kTagSchedule = 3,
  kTagTrial = 4,
  kTagSpontaneous = 5,
  kTagFold = 6,
  kTagShuffle = 7,
  kTagNoise = 8,
  kTagReservoir = 9,
  kTagCalibration = 10,
  kTagTrace = 11,
  kTagTraining = 12,
};

}  // namespace mea
