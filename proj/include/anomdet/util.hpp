#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>

namespace anomdet {

// 64-bit FNV-1a over bytes. Stable across platforms; used to derive
// per-object seeds from canonical names.
std::uint64_t fnv1a64(std::string_view s,
                      std::uint64_t h = 14695981039346656037ull);

// Combines two seeds into one (splitmix64 finalizer over the xor).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

// Deterministic RNG front-end. All randomness in the project flows through
// this class: the engine is the standardized mt19937_64, and the uniform and
// normal transforms are implemented here instead of with std:: distributions,
// whose output sequences are implementation-defined. Same seed, same stream,
// on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  // Uniform in [a, b).
  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // One standard normal draw (Box-Muller; the spare deviate is cached).
  double normal();

  // Two independent standard normal draws.
  std::pair<double, double> normal_pair();

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Shortest decimal string that parses back to exactly the same double.
// Used everywhere a double is written to a file, so that outputs are
// byte-reproducible.
std::string format_double(double v);

// Glob with '*' (any run) and '?' (any one char). No character classes.
bool glob_match(std::string_view pattern, std::string_view text);

// Runs fn(begin, end) over disjoint chunks of [0, n), possibly on several
// threads. fn must only write to slots inside its own range; results are
// then independent of the thread schedule.
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace anomdet
