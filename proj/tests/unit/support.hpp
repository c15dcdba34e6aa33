#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace testing {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_se(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  double m = 0.0;
  for (double v : x) m += v;
  m /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return {m, std::sqrt(ss / (n - 1.0) / n)};
}

inline bool within_se(const MeanSe& s, double target, double k = 3.0) {
  return std::abs(s.mean - target) <= k * s.se;
}

// Composite Simpson on an odd number of equispaced samples.
inline double simpson(const std::vector<double>& f, double h) {
  double s = f.front() + f.back();
  for (std::size_t i = 1; i + 1 < f.size(); ++i) s += (i % 2 ? 4.0 : 2.0) * f[i];
  return s * h / 3.0;
}

} // namespace testing
