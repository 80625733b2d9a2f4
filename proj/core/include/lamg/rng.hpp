#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Core>

namespace lamg {

// Counter-based generator (splitmix64 over a Weyl sequence). Cheap to fork:
// substream(i) derives an independent stream from (seed, i) without sharing
// state, which keeps parallel walk estimates order-independent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix(seed ^ 0x9e3779b97f4a7c15ull)) {}

  Rng substream(std::uint64_t index) const {
    Rng r(0);
    r.state_ = mix(state_ ^ mix(index + 0x632be59bd9b4e019ull));
    return r;
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix(state_);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  Eigen::Vector3d unit_vector() {
    double z = 1.0 - 2.0 * uniform();
    double phi = 2.0 * M_PI * uniform();
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {r * std::cos(phi), r * std::sin(phi), z};
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace lamg
