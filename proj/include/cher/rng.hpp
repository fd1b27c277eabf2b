#pragma once

#include "cher/common.hpp"

#include <cstdint>
#include <random>
#include <string_view>

namespace cher {

// Seeded generator with named, independent sub-streams. Every stochastic
// draw in a run is expected to come from a stream derived from the run seed,
// so that two runs with the same seed consume identical sequences.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(mix(seed)) {}

  // Independent generator keyed by (seed, name).
  static Rng stream(std::uint64_t seed, std::string_view name) {
    return Rng(mix(seed ^ fnv1a(name)));
  }
  Rng split(std::string_view name) const { return stream(seed_, name); }

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  bool bernoulli(double p) { return uniform() < p; }
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  Vec uniform_vec(const Vec& lo, const Vec& hi) {
    Vec out(lo.size());
    for (Eigen::Index i = 0; i < lo.size(); ++i) out[i] = uniform(lo[i], hi[i]);
    return out;
  }
  Vec normal_vec(Eigen::Index n, double stddev = 1.0) {
    Vec out(n);
    for (Eigen::Index i = 0; i < n; ++i) out[i] = normal(0.0, stddev);
    return out;
  }

  std::mt19937_64& engine() { return engine_; }
  std::uint64_t seed() const { return seed_; }

 private:
  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ULL;
    }
    return h;
  }
  // splitmix64 finalizer
  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace cher
