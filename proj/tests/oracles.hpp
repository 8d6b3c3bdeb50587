#pragma once

// Brute-force reference computations. These work on plain maps and
// floating-point utilities, enumerating magnitude vectors and joint outcomes
// directly, and share no code path with the lattice/convolution library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <random>
#include <vector>

namespace oracle {

using Dist = std::map<int, double>;  // key -> probability
using UtilDist = std::vector<std::pair<double, double>>;  // (utility, prob), utility ascending

inline constexpr double kTieTol = 1e-12;

struct Prefs {
  bool additive = true;
  bool risk_neutral = true;
  double gamma = 1.0;
  std::vector<int> max_x;
};

inline double value(const Prefs& p, const std::vector<int>& x) {
  const std::size_t k = x.size();
  if (p.additive) {
    double bk = 0.0;
    for (std::size_t j = 1; j <= k; ++j) bk += static_cast<double>(j);
    double v = 0.0;
    for (std::size_t j = 0; j < k; ++j) v += (static_cast<double>(j + 1) / bk) * (static_cast<double>(x[j]) / p.max_x[j]);
    return v;
  }
  double s = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const double vj = static_cast<double>(x[j]) / p.max_x[j];
    s += vj * vj;
  }
  return std::sqrt(s / static_cast<double>(k));
}

inline double utility(const Prefs& p, double v) {
  if (p.risk_neutral) return v;
  return (1.0 - std::exp(-p.gamma * v)) / (1.0 - std::exp(-p.gamma));
}

// Enumerates every vector in the product of the supports, weights it by the
// product of its marginal probabilities and groups equal utilities.
inline UtilDist utility_distribution(const std::vector<Dist>& beliefs, const Prefs& p) {
  std::vector<std::pair<double, double>> atoms;
  std::vector<int> x(beliefs.size());
  std::function<void(std::size_t, double)> rec = [&](std::size_t j, double prob) {
    if (j == beliefs.size()) {
      atoms.emplace_back(utility(p, value(p, x)), prob);
      return;
    }
    for (const auto& [key, q] : beliefs[j]) {
      if (q <= 0.0) continue;
      x[j] = key;
      rec(j + 1, prob * q);
    }
  };
  rec(0, 1.0);
  std::sort(atoms.begin(), atoms.end());
  UtilDist out;
  for (const auto& a : atoms) {
    if (!out.empty() && std::abs(a.first - out.back().first) <= kTieTol) {
      out.back().second += a.second;
    } else {
      out.push_back(a);
    }
  }
  return out;
}

inline double expectation(const UtilDist& d) {
  double e = 0.0;
  for (const auto& [u, q] : d) e += u * q;
  return e;
}

// Enumerates the joint outcome of all utilities and credits the winner under
// "greater utility, or equal utility and lower index".
inline std::vector<double> prob_best(const std::vector<UtilDist>& dists) {
  const std::size_t m = dists.size();
  std::vector<double> out(m, 0.0);
  std::vector<double> z(m);
  std::function<void(std::size_t, double)> rec = [&](std::size_t h, double prob) {
    if (h == m) {
      std::size_t best = 0;
      for (std::size_t g = 1; g < m; ++g) {
        if (z[g] > z[best] + kTieTol) best = g;
      }
      out[best] += prob;
      return;
    }
    for (const auto& [u, q] : dists[h]) {
      z[h] = u;
      rec(h + 1, prob * q);
    }
  };
  rec(0, 1.0);
  return out;
}

// Bayes' rule, term by term.
inline Dist posterior(const Dist& prior, const Dist& error, int w) {
  Dist out;
  double denom = 0.0;
  for (const auto& [x, q] : prior) {
    auto it = error.find(w - x);
    const double like = it == error.end() ? 0.0 : it->second;
    denom += q * like;
  }
  for (const auto& [x, q] : prior) {
    auto it = error.find(w - x);
    const double like = it == error.end() ? 0.0 : it->second;
    if (q * like > 0.0) out[x] = q * like / denom;
  }
  return out;
}

inline double predictive(const Dist& prior, const Dist& error, int w) {
  double s = 0.0;
  for (const auto& [x, q] : prior) {
    auto it = error.find(w - x);
    if (it != error.end()) s += q * it->second;
  }
  return s;
}

// beliefs[i][j]; errors[j]. For each pair, enumerates every sample value,
// rebuilds every alternative's utility law from scratch and takes the
// predictive-weighted average of the best E[Z] (rule I) or best P (rule II).
inline std::vector<std::vector<double>> lookahead(const std::vector<std::vector<Dist>>& beliefs,
                                                  const std::vector<Dist>& errors, const Prefs& p, bool rule_one) {
  const std::size_t m = beliefs.size();
  const std::size_t k = beliefs.front().size();
  std::vector<std::vector<double>> out(m, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      int lo = 1 << 20, hi = -(1 << 20);
      for (const auto& [x, q] : beliefs[i][j]) {
        for (const auto& [e, r] : errors[j]) {
          lo = std::min(lo, x + e);
          hi = std::max(hi, x + e);
        }
      }
      double score = 0.0;
      for (int w = lo; w <= hi; ++w) {
        const double ps = predictive(beliefs[i][j], errors[j], w);
        if (ps <= 0.0) continue;
        auto next = beliefs;
        next[i][j] = posterior(beliefs[i][j], errors[j], w);
        std::vector<UtilDist> z;
        for (const auto& row : next) z.push_back(utility_distribution(row, p));
        double f = 0.0;
        if (rule_one) {
          for (const auto& d : z) f = std::max(f, expectation(d));
        } else {
          const auto pb = prob_best(z);
          f = *std::max_element(pb.begin(), pb.end());
        }
        score += ps * f;
      }
      out[i][j] = score;
    }
  }
  return out;
}

// Random pmf on a random sub-range of 1..max_x, some entries possibly zero.
inline Dist random_dist(std::mt19937_64& gen, int max_x) {
  std::uniform_int_distribution<int> pick(1, max_x);
  int a = pick(gen), b = pick(gen);
  if (a > b) std::swap(a, b);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Dist d;
  double total = 0.0;
  for (int x = a; x <= b; ++x) {
    double q = u(gen);
    if (q < 0.15 && b > a) q = 0.0;
    d[x] = q;
    total += q;
  }
  if (total <= 0.0) {
    d[a] = 1.0;
    total = 1.0;
  }
  Dist out;
  for (const auto& [x, q] : d) {
    if (q > 0.0) out[x] = q / total;
  }
  return out;
}

// Random symmetric error pmf on -r..r with the peak at 0.
inline Dist random_error(std::mt19937_64& gen, int r) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> half(static_cast<std::size_t>(r) + 1);
  for (auto& h : half) h = u(gen);
  std::sort(half.begin(), half.end(), std::greater<>());
  double total = half[0];
  for (int e = 1; e <= r; ++e) total += 2.0 * half[static_cast<std::size_t>(e)];
  Dist d;
  for (int e = -r; e <= r; ++e) d[e] = half[static_cast<std::size_t>(std::abs(e))] / total;
  return d;
}

}  // namespace oracle
