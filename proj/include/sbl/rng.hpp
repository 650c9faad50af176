#pragma once

#include <cmath>
#include <complex>
#include <cstdint>

namespace sbl {

namespace detail {

// Finalizer from SplitMix64; a bijection on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace detail

// Keyed counter generator built on SplitMix64. Child streams are derived by
// key rather than by jumping, so a stream's output never depends on how much
// randomness its siblings consumed. Identical seeds give identical sequences
// on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(seed), state_(seed) {}

  // Key for an independent child stream. Fixed at construction, so forked
  // streams do not depend on how much the parent has consumed.
  std::uint64_t derive(std::uint64_t stream) const {
    return detail::mix64(key_ ^ detail::mix64(stream + 0x9e3779b97f4a7c15ull));
  }

  Rng fork(std::uint64_t stream) const { return Rng(derive(stream)); }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return detail::mix64(state_);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  // Circularly symmetric complex Gaussian, E|z|^2 = variance.
  std::complex<double> normal_complex(double variance) {
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-variance * std::log1p(-u1));
    double phi = 6.283185307179586476925287 * u2;
    return {r * std::cos(phi), r * std::sin(phi)};
  }

  // exp(j 2 pi U), uniform on the unit circle.
  std::complex<double> unit_phase() {
    double phi = 6.283185307179586476925287 * uniform();
    return {std::cos(phi), std::sin(phi)};
  }

 private:
  std::uint64_t key_;
  std::uint64_t state_;
};

}  // namespace sbl
