#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace vfest {

// Seeded generator with independent substreams. Substream k of seed s is an
// mt19937_64 seeded with splitmix64(s ^ splitmix64(k)); uniforms take the top
// 53 bits; normals use the Marsaglia polar method. The algorithm identifier is
// written into every simulation report.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64+splitmix64-substreams+polar-normal";

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace vfest
