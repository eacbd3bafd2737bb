#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace spice {

// Seedable generator whose draws are identical on every conforming platform.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the
// standard. Distributions from <random> are implementation-defined, so the
// uniform, normal and bounded-integer draws are built here from raw engine
// output. Independent streams come from mixing (seed, stream) with splitmix64
// before seeding the engine.
class Rng {
 public:
  static constexpr std::string_view kGeneratorName = "mt19937_64+splitmix64-streams";

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Standard normal via Box-Muller, caching the second variate.
  double normal();
  // Uniform integer in [0, bound), rejection sampled (no modulo bias).
  std::uint64_t below(std::uint64_t bound);

  // Derive an independent child stream.
  Rng split(std::uint64_t stream) const { return Rng(seed_, stream_ * 0x9E3779B97F4A7C15ULL + stream + 1); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// First k entries of a Fisher-Yates shuffle of 0..n-1.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng);

}  // namespace spice
