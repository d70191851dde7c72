#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace gpert {

// Platform-independent 64-bit hashing. FNV-1a over the bytes, finished with
// the splitmix64 mixer so nearby inputs land far apart.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t hash_bytes(std::string_view bytes, std::uint64_t seed = 0);

// Hash of a seed and an ordered list of text parts. Parts are length-prefixed,
// so ("ab","c") and ("a","bc") differ.
std::uint64_t hash_parts(std::uint64_t seed, std::initializer_list<std::string_view> parts);

// Named seed derivation: every random stream in the pipeline is
// derive_seed(root, stage, key).
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view stage, std::string_view key) {
  return hash_parts(root, {stage, key});
}

// Deterministic generator with portable conversions (the std distributions
// are implementation-defined, these are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

// Counter-based standard normal: a pure function of (key, index).
double counter_normal(std::uint64_t key, std::uint64_t index);

}  // namespace gpert
