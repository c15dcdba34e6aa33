#pragma once

// Counter-based random streams.
//
// Every stream is identified by (seed, path index, channel). Draw k of a
// stream is a pure function of that key and k, so results do not depend on
// which worker evaluates a path or in which order paths are visited.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace lrf {

enum class Channel : std::uint64_t {
  Gaussian = 1,
  PoissonCount = 2,
  PoissonMarks = 3,
  PoissonTimes = 4,
  RateResidual = 5,
};

namespace detail {

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

} // namespace detail

/// Derive a child seed; used to decorrelate sweep cells sharing a base seed.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  return detail::mix64(detail::mix64(seed) ^ (salt * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL));
}

class RandomStream {
public:
  using result_type = std::uint64_t;

  RandomStream(std::uint64_t seed, std::uint64_t path, Channel channel)
      : key_(detail::mix64(detail::mix64(seed ^ 0xd1b54a32d192ed03ULL) +
                           detail::mix64(path + 0x8cb92ba72f3d8dd7ULL) +
                           static_cast<std::uint64_t>(channel) * 0x9e3779b97f4a7c15ULL)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    return detail::mix64(key_ + 0x9e3779b97f4a7c15ULL * (++counter_));
  }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double exponential(double mean) { return -mean * std::log(uniform()); }

  /// Poisson draw by sequential inversion; large means are split into
  /// chunks of at most 30 (sums of independent Poissons are Poisson).
  std::uint64_t poisson(double mean) {
    std::uint64_t count = 0;
    while (mean > 30.0) {
      count += poisson_small(30.0);
      mean -= 30.0;
    }
    return count + poisson_small(mean);
  }

  std::uint64_t counter() const { return counter_; }

private:
  std::uint64_t poisson_small(double mean) {
    if (mean <= 0.0) return 0;
    const double u = uniform();
    double p = std::exp(-mean);
    double cdf = p;
    std::uint64_t k = 0;
    while (u > cdf && k < 1000) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// The four streams owned by one Monte Carlo path.
struct PathStreams {
  PathStreams(std::uint64_t seed, std::uint64_t path)
      : gaussian(seed, path, Channel::Gaussian),
        poisson_count(seed, path, Channel::PoissonCount),
        poisson_marks(seed, path, Channel::PoissonMarks),
        poisson_times(seed, path, Channel::PoissonTimes) {}

  RandomStream gaussian;
  RandomStream poisson_count;
  RandomStream poisson_marks;
  RandomStream poisson_times;
};

} // namespace lrf
