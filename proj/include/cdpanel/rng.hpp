#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace cdpanel {

/// Random stream for one unit of simulation work.
///
/// Backed by a 64-bit Mersenne Twister (19937-bit state). A stream is a pure
/// function of its key: the key words are split into 32-bit halves and fed to
/// std::seed_seq, so (master_seed, replication, purpose) -> stream is fixed
/// and distinct keys give unrelated streams. Streams are never shared between
/// threads.
class RandomStream {
 public:
  explicit RandomStream(std::initializer_list<std::uint64_t> key) {
    std::vector<std::uint32_t> words;
    words.reserve(2 * key.size() + 1);
    words.push_back(static_cast<std::uint32_t>(key.size()));
    for (std::uint64_t k : key) {
      words.push_back(static_cast<std::uint32_t>(k & 0xffffffffu));
      words.push_back(static_cast<std::uint32_t>(k >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    engine_.seed(seq);
  }

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  double standard_normal() { return normal_(engine_); }

  double normal(double mean, double variance) {
    return mean + std::sqrt(variance) * standard_normal();
  }

  /// chi-squared with two degrees of freedom as a sum of two squared normals.
  double chi2_2() {
    const double a = standard_normal();
    const double b = standard_normal();
    return a * a + b * b;
  }

  /// (chi2(2) - 2) / 2: mean 0, variance 1.
  double standardized_chi2_2() { return (chi2_2() - 2.0) / 2.0; }

  /// +1 or -1 with equal probability, one engine draw.
  int rademacher() { return (engine_() >> 63) ? 1 : -1; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace cdpanel
