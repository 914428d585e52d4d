#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace tiebout {

// Portable uniform/Dirichlet draws on top of mt19937_64. The standard
// distributions are implementation-defined, which would break the
// byte-identical report contract across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Stream for trial `index` of a run seeded with `seed`; independent of
  // the order in which trials are scheduled.
  static Rng stream(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    std::mt19937_64 engine(seq);
    return Rng(engine());
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  // Flat Dirichlet(1,...,1) draw: normalized exponentials.
  std::vector<double> dirichlet(std::size_t n) {
    std::vector<double> out(n);
    double total = 0.0;
    for (auto& x : out) {
      x = -std::log(1.0 - uniform());
      total += x;
    }
    for (auto& x : out) x /= total;
    return out;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace tiebout
