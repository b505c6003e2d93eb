#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace mono3d {

// Malformed external input (files, config, CLI args). The CLI maps this to exit code 2.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Violated numeric or shape contract. The CLI maps this to exit code 1.
struct CheckError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr double kPi = 3.14159265358979323846;

// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

// SplitMix64 generator. 64-bit linear state, forkable into independent
// streams by id so modules can draw without coupling their sequences.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Independent child stream; the parent sequence is not advanced.
  Rng fork(uint64_t stream_id) const {
    uint64_t s = state_ ^ (0xA0761D6478BD642Full * (stream_id + 1));
    Rng child(s);
    child.next_u64();
    return child;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
  }

  double normal() {
    // Box-Muller, one value per call.
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

 private:
  uint64_t state_;
};

}  // namespace mono3d
