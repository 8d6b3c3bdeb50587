#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "errors.hpp"

namespace sampalloc {

enum class Verdict { Better, Worse, Indistinguishable };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Better: return "better";
    case Verdict::Worse: return "worse";
    default: return "indistinguishable";
  }
}

inline Verdict mirror(Verdict v) {
  if (v == Verdict::Better) return Verdict::Worse;
  if (v == Verdict::Worse) return Verdict::Better;
  return v;
}

// Order-independent sum (sorted, then accumulated) so aggregates do not
// depend on the order runs finished in.
inline double stable_sum(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  return std::accumulate(xs.begin(), xs.end(), 0.0);
}

inline double mean(std::span<const double> xs) {
  return stable_sum({xs.begin(), xs.end()}) / static_cast<double>(xs.size());
}

inline double sample_variance(std::span<const double> xs) {
  const double mu = mean(xs);
  std::vector<double> sq;
  sq.reserve(xs.size());
  for (double x : xs) sq.push_back((x - mu) * (x - mu));
  return stable_sum(std::move(sq)) / static_cast<double>(xs.size() - 1);
}

struct WelchResult {
  double diff = 0.0;  // mean(a) - mean(b)
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
};

inline WelchResult welch_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw InsufficientData("Welch test needs at least 2 observations per group");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double va = sample_variance(a) / na, vb = sample_variance(b) / nb;
  WelchResult r;
  r.diff = mean(a) - mean(b);
  const double se2 = va + vb;
  if (se2 <= 0.0) {
    // Both groups constant: identical means are indistinguishable, different ones certain.
    r.df = na + nb - 2.0;
    if (r.diff == 0.0) return r;
    r.t = r.diff > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.p = 0.0;
    return r;
  }
  r.t = r.diff / std::sqrt(se2);
  r.df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  const boost::math::students_t dist(r.df);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

struct ProportionCi {
  double diff = 0.0;  // p_a - p_b
  double se = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool excludes_zero() const { return lo > 0.0 || hi < 0.0; }
};

/// Normal-approximation CI for a difference of two independent proportions.
inline ProportionCi proportion_diff_ci(std::size_t successes_a, std::size_t n_a, std::size_t successes_b,
                                       std::size_t n_b, double confidence = 0.95) {
  if (n_a < 2 || n_b < 2) throw InsufficientData("proportion CI needs at least 2 runs per group");
  const double pa = static_cast<double>(successes_a) / static_cast<double>(n_a);
  const double pb = static_cast<double>(successes_b) / static_cast<double>(n_b);
  const double z = boost::math::quantile(boost::math::normal(), 0.5 + confidence / 2.0);
  ProportionCi ci;
  ci.diff = pa - pb;
  ci.se = std::sqrt(pa * (1.0 - pa) / static_cast<double>(n_a) + pb * (1.0 - pb) / static_cast<double>(n_b));
  ci.lo = ci.diff - z * ci.se;
  ci.hi = ci.diff + z * ci.se;
  return ci;
}

}  // namespace sampalloc
