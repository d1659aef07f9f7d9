#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace nosd {

// Seed-portable random source.  mt19937_64 output is fixed by the
// standard and every distribution below is implemented explicitly, so a
// seed produces the same stream on every platform and compiler.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() {  // in [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // Box-Muller on two fresh uniforms
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  int binomial(int n, double p) {
    if (n < 0 || p < 0.0 || p > 1.0)
      throw std::invalid_argument("Rng::binomial: invalid n or p");
    int k = 0;
    for (int i = 0; i < n; ++i)
      if (uniform() < p) ++k;
    return k;
  }

  // Multinomial draw by sequential binomial conditioning.
  std::vector<int> multinomial(int n, const std::vector<double>& probs) {
    std::vector<int> counts(probs.size(), 0);
    double remaining_mass = 0.0;
    for (double q : probs) {
      if (q < 0.0) throw std::invalid_argument("Rng::multinomial: negative probability");
      remaining_mass += q;
    }
    int remaining = n;
    for (std::size_t j = 0; j + 1 < probs.size() && remaining > 0; ++j) {
      const double cond = remaining_mass > 0.0 ? std::min(1.0, probs[j] / remaining_mass) : 0.0;
      const int c = binomial(remaining, cond);
      counts[j] = c;
      remaining -= c;
      remaining_mass -= probs[j];
    }
    if (!probs.empty()) counts.back() += remaining;
    return counts;
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace nosd
