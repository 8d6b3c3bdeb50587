#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "pmf.hpp"

namespace sampalloc {

// A: additive with weights j/B_k.  B: root-mean-square, favours balanced vectors.
enum class ValueKind { Additive, Compensating };
enum class UtilityKind { RiskNeutral, Exponential };

inline std::string to_string(ValueKind v) { return v == ValueKind::Additive ? "A" : "B"; }
inline std::string to_string(UtilityKind u) {
  return u == UtilityKind::RiskNeutral ? "neutral" : "averse";
}

inline ValueKind parse_value_kind(const std::string& s) {
  if (s == "A") return ValueKind::Additive;
  if (s == "B") return ValueKind::Compensating;
  throw std::invalid_argument("unknown value function kind '" + s + "' (expected A or B)");
}

inline UtilityKind parse_utility_kind(const std::string& s) {
  if (s == "neutral") return UtilityKind::RiskNeutral;
  if (s == "averse") return UtilityKind::Exponential;
  throw std::invalid_argument("unknown utility kind '" + s + "' (expected neutral or averse)");
}

struct ValueFunctionSpec {
  ValueKind kind = ValueKind::Additive;
  std::vector<int> max_magnitudes;  // attribute j takes magnitudes 1..max_magnitudes[j]

  std::size_t k() const { return max_magnitudes.size(); }

  void validate() const {
    if (k() < 2) throw std::invalid_argument("value function needs at least 2 attributes");
    for (int mx : max_magnitudes) {
      if (mx < 1) throw std::invalid_argument("attribute magnitude range must be non-empty");
    }
  }
};

struct UtilityFunctionSpec {
  UtilityKind kind = UtilityKind::RiskNeutral;
  double gamma = 0.0;  // risk aversion, used by the exponential kind only

  void validate() const {
    if (kind == UtilityKind::Exponential && !(gamma > 0.0)) {
      throw std::invalid_argument("exponential utility needs gamma > 0");
    }
  }
};

inline double single_attr_value(int x, int max_x) {
  if (x < 1 || x > max_x) {
    std::ostringstream msg;
    msg << "magnitude " << x << " outside 1.." << max_x;
    throw OutOfRange(msg.str());
  }
  return static_cast<double>(x) / max_x;
}

inline double value(const ValueFunctionSpec& spec, std::span<const int> x) {
  if (x.size() != spec.k()) throw OutOfRange("magnitude vector has the wrong length");
  const std::size_t k = spec.k();
  double acc = 0.0;
  if (spec.kind == ValueKind::Additive) {
    const double bk = static_cast<double>(k * (k + 1) / 2);
    for (std::size_t j = 0; j < k; ++j) {
      acc += (static_cast<double>(j + 1) / bk) * single_attr_value(x[j], spec.max_magnitudes[j]);
    }
    return acc;
  }
  for (std::size_t j = 0; j < k; ++j) {
    const double vj = single_attr_value(x[j], spec.max_magnitudes[j]);
    acc += vj * vj;
  }
  return std::sqrt(acc / static_cast<double>(k));
}

inline double utility(const UtilityFunctionSpec& spec, double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw OutOfRange("value must lie in [0, 1]");
  if (spec.kind == UtilityKind::RiskNeutral) return v;
  return std::expm1(-spec.gamma * v) / std::expm1(-spec.gamma);
}

/// Exact integer statistic of a magnitude vector that orders vectors by value.
///
/// With L the lcm of the attribute ranges, attribute j contributes
/// (j+1)·x·(L/max_j) under value A and (x·L/max_j)^2 under value B; the value
/// is key/(B_k·L) or sqrt(key/(k·L^2)) respectively. Equal keys mean equal values.
class ValueLattice {
 public:
  explicit ValueLattice(ValueFunctionSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    long long l = 1;
    for (int mx : spec_.max_magnitudes) l = std::lcm(l, static_cast<long long>(mx));
    const long long k = static_cast<long long>(spec_.k());
    const long long max_key = spec_.kind == ValueKind::Additive ? k * (k + 1) / 2 * l : k * l * l;
    if (max_key > 50'000'000) throw std::invalid_argument("value lattice too large");
    lcm_ = static_cast<int>(l);
    max_key_ = static_cast<int>(max_key);
    bk_ = static_cast<int>(k * (k + 1) / 2);
  }

  const ValueFunctionSpec& spec() const { return spec_; }
  std::size_t k() const { return spec_.k(); }
  int max_key() const { return max_key_; }

  int contribution(std::size_t j, int x) const {
    const int scaled = x * (lcm_ / spec_.max_magnitudes[j]);
    if (spec_.kind == ValueKind::Additive) return static_cast<int>(j + 1) * scaled;
    return scaled * scaled;
  }

  int key(std::span<const int> x) const {
    int acc = 0;
    for (std::size_t j = 0; j < x.size(); ++j) acc += contribution(j, x[j]);
    return acc;
  }

  double value_of(int key) const {
    if (spec_.kind == ValueKind::Additive) return static_cast<double>(key) / (bk_ * static_cast<double>(lcm_));
    const double l = lcm_;
    return std::sqrt(static_cast<double>(key) / (static_cast<double>(k()) * l * l));
  }

 private:
  ValueFunctionSpec spec_;
  int lcm_ = 1;
  int bk_ = 1;
  int max_key_ = 0;
};

/// Lattice plus a utility function, with U(v(key)) tabulated for every key.
class UtilityMap {
 public:
  UtilityMap(ValueFunctionSpec vspec, UtilityFunctionSpec uspec)
      : lattice_(std::move(vspec)), uspec_(uspec) {
    uspec_.validate();
    table_.resize(static_cast<std::size_t>(lattice_.max_key()) + 1);
    for (int key = 0; key <= lattice_.max_key(); ++key) {
      table_[static_cast<std::size_t>(key)] = utility(uspec_, std::min(1.0, lattice_.value_of(key)));
    }
  }

  const ValueLattice& lattice() const { return lattice_; }
  const ValueFunctionSpec& value_spec() const { return lattice_.spec(); }
  const UtilityFunctionSpec& utility_spec() const { return uspec_; }
  std::size_t k() const { return lattice_.k(); }
  int max_key() const { return lattice_.max_key(); }

  double operator()(int key) const { return table_[static_cast<std::size_t>(key)]; }
  std::span<const double> table() const { return table_; }

 private:
  ValueLattice lattice_;
  UtilityFunctionSpec uspec_;
  std::vector<double> table_;
};

/// Distribution of one attribute's lattice contribution.
inline Pmf contribution_pmf(const ValueLattice& lattice, std::size_t j, const Pmf& belief) {
  return belief.map_keys([&](int x) { return lattice.contribution(j, x); });
}

/// Exact law of an alternative's utility, as a pmf over lattice keys, from
/// independent per-attribute magnitude beliefs. Built by convolving the
/// attribute contributions, so the cost never scales with the full product space.
inline Pmf utility_distribution(std::span<const Pmf> beliefs, const ValueLattice& lattice) {
  if (beliefs.size() != lattice.k()) throw std::invalid_argument("need one belief per attribute");
  Pmf acc = contribution_pmf(lattice, 0, beliefs[0]);
  for (std::size_t j = 1; j < beliefs.size(); ++j) {
    acc = convolve(acc, contribution_pmf(lattice, j, beliefs[j]));
  }
  return acc;
}

struct UtilityAtom {
  double utility;
  double prob;
};

/// Fallback for value functions without an integer lattice: enumerates every
/// magnitude vector with positive probability and merges utilities that agree
/// within 1e-12. Exponential in k; not used on the default path.
inline std::vector<UtilityAtom> enumerate_utility_distribution(std::span<const Pmf> beliefs,
                                                               const ValueFunctionSpec& vspec,
                                                               const UtilityFunctionSpec& uspec) {
  const std::size_t k = beliefs.size();
  std::vector<UtilityAtom> atoms;
  std::vector<std::size_t> idx(k, 0);
  std::vector<int> x(k);
  while (true) {
    double p = 1.0;
    for (std::size_t j = 0; j < k; ++j) {
      x[j] = beliefs[j].key(idx[j]);
      p *= beliefs[j].prob_at(idx[j]);
    }
    atoms.push_back({utility(uspec, std::min(1.0, value(vspec, x))), p});
    std::size_t j = 0;
    while (j < k && ++idx[j] == beliefs[j].size()) idx[j++] = 0;
    if (j == k) break;
  }
  std::sort(atoms.begin(), atoms.end(), [](const auto& a, const auto& b) { return a.utility < b.utility; });
  std::vector<UtilityAtom> merged;
  for (const auto& a : atoms) {
    if (!merged.empty() && a.utility - merged.back().utility <= 1e-12) {
      merged.back().prob += a.prob;
    } else {
      merged.push_back(a);
    }
  }
  return merged;
}

/// True utilities of every alternative and the set of truly best ones.
struct TrueUtilities {
  std::vector<double> xi;
  std::vector<int> keys;
  double best = 0.0;
  std::vector<std::size_t> best_set;

  bool is_best(std::size_t i) const {
    return std::find(best_set.begin(), best_set.end(), i) != best_set.end();
  }
};

// `mu` is row-major m×k. Ties in A* are decided on exact lattice keys.
inline TrueUtilities true_utilities(std::span<const int> mu, const UtilityMap& umap) {
  const std::size_t k = umap.k();
  if (mu.empty() || mu.size() % k != 0) throw std::invalid_argument("magnitude matrix shape mismatch");
  const std::size_t m = mu.size() / k;
  TrueUtilities out;
  int best_key = -1;
  for (std::size_t i = 0; i < m; ++i) {
    auto row = mu.subspan(i * k, k);
    for (std::size_t j = 0; j < k; ++j) single_attr_value(row[j], umap.value_spec().max_magnitudes[j]);
    const int key = umap.lattice().key(row);
    out.keys.push_back(key);
    out.xi.push_back(umap(key));
    best_key = std::max(best_key, key);
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (out.keys[i] == best_key) out.best_set.push_back(i);
  }
  out.best = umap(best_key);
  return out;
}

inline double true_utility(std::span<const int> mu_row, const ValueFunctionSpec& vspec,
                           const UtilityFunctionSpec& uspec) {
  return utility(uspec, std::min(1.0, value(vspec, mu_row)));
}

}  // namespace sampalloc
