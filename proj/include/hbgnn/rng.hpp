#ifndef HBGNN_RNG_HPP_
#define HBGNN_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "hbgnn/error.hpp"
#include "hbgnn/tensor.hpp"

namespace hbgnn {

/// Seeded pseudorandom source. The engine is MT19937-64, whose output
/// sequence is fixed by the C++ standard, and all derived draws go through
/// explicit bit manipulation rather than std distributions, so the same seed
/// yields the same samples on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Modulo reduction; the bias is below 2^-53
  /// for every n used here and the mapping is platform-independent.
  std::uint64_t below(std::uint64_t n) { return engine_() % n; }

  /// Standard normal via Box-Muller on two uniform draws.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  /// Fisher-Yates shuffle driven by this engine.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// Kaiming uniform initialization with the ReLU-family gain sqrt(2):
/// samples are uniform in [-b, b] with b = sqrt(6 / fan_in).
template <typename S>
Tensor<S> kaiming_uniform(std::size_t fan_in, std::vector<std::size_t> shape, Rng& rng) {
  if (fan_in == 0) throw DomainError("kaiming_uniform: fan_in must be >= 1");
  const double bound = std::sqrt(6.0 / double(fan_in));
  Tensor<S> t(std::move(shape));
  for (auto& x : t.data) x = S(rng.uniform(-bound, bound));
  return t;
}

}  // namespace hbgnn

#endif  // HBGNN_RNG_HPP_
