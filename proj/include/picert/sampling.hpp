#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace picert {

// Deterministic RNG used everywhere randomness is needed.  The uniform
// mapping is written out explicitly (instead of std::uniform_real_distribution)
// so streams are bit-identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer on [lo, hi] via rejection-free modular mapping on 64 bits;
  // bias is negligible for the small ranges used here and fully deterministic.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<std::int64_t>(eng_() % span);
  }

  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

// Van der Corput radical inverse; bases 2, 3, 5, ... give a Halton sequence.
inline double radical_inverse(std::uint64_t index, std::uint64_t base) {
  double inv_base = 1.0 / static_cast<double>(base);
  double f = inv_base;
  double value = 0.0;
  while (index > 0) {
    value += f * static_cast<double>(index % base);
    index /= base;
    f *= inv_base;
  }
  return value;
}

// First `count` Halton points in the axis-aligned box, skipping index 0.
std::vector<Eigen::VectorXd> halton_box(
    int count, const std::vector<std::array<double, 2>>& bounds);

}  // namespace picert
