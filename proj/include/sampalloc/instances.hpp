#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "pmf.hpp"
#include "preference.hpp"
#include "rng.hpp"

namespace sampalloc {

inline ErrorModel tabulated_error(std::vector<double> probs, double std_dev) {
  std::vector<int> offsets(probs.size());
  std::iota(offsets.begin(), offsets.end(), -static_cast<int>(probs.size() / 2));
  // Printed rows are rounded (row 1 sums to 1.001); the Pmf constructor renormalizes.
  return ErrorModel(Pmf(std::move(offsets), std::move(probs)), std_dev);
}

/// Error distributions on offsets -3..3 for problem set "A" or "B".
inline std::vector<ErrorModel> error_table(const std::string& set_name) {
  if (set_name == "A") {
    return {
        tabulated_error({0.020, 0.116, 0.211, 0.307, 0.211, 0.116, 0.020}, 1.31),
        tabulated_error({0.080, 0.129, 0.178, 0.227, 0.178, 0.129, 0.080}, 1.68),
        tabulated_error({0.140, 0.142, 0.144, 0.147, 0.144, 0.142, 0.140}, 1.99),
    };
  }
  if (set_name == "B") {
    return {
        tabulated_error({0.020, 0.116, 0.211, 0.307, 0.211, 0.116, 0.020}, 1.31),
        tabulated_error({0.060, 0.124, 0.189, 0.253, 0.189, 0.124, 0.060}, 1.57),
        tabulated_error({0.100, 0.133, 0.167, 0.200, 0.167, 0.133, 0.100}, 1.79),
        tabulated_error({0.140, 0.142, 0.144, 0.147, 0.144, 0.142, 0.140}, 1.99),
    };
  }
  throw UnknownSet("unknown problem set '" + set_name + "' (expected A or B)");
}

struct ProblemSetSpec {
  std::string name;
  std::size_t m = 0;
  std::size_t k = 0;
  int max_magnitude = 15;
  std::vector<ErrorModel> errors;  // one row per attribute, assigned by permutation
};

inline ProblemSetSpec problem_set(const std::string& name) {
  ProblemSetSpec spec;
  spec.name = name;
  spec.errors = error_table(name);
  spec.k = spec.errors.size();
  spec.m = name == "A" ? 12 : 9;
  return spec;
}

/// One generated problem: true magnitudes, the error row used by each
/// attribute, and the preference model the decision-maker evaluates with.
struct Instance {
  ProblemSetSpec spec;
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::vector<int> mu;                     // row-major m×k, each in 1..max_magnitude
  std::vector<std::size_t> error_assignment;  // attribute j -> error table row
  ValueKind value_kind = ValueKind::Additive;
  UtilityKind utility_kind = UtilityKind::RiskNeutral;
  double gamma = 1.0;  // drawn for every instance, used only when risk averse
  // Latent generator draws, kept for audit.
  std::size_t anchor_attr = 0;
  double alpha = 1.0;
  std::vector<double> weights;  // d_j, zero at the anchor attribute

  std::size_t m() const { return spec.m; }
  std::size_t k() const { return spec.k; }
  int magnitude(std::size_t i, std::size_t j) const { return mu[i * k() + j]; }
  const ErrorModel& error_model(std::size_t j) const { return spec.errors[error_assignment[j]]; }

  std::vector<ErrorModel> error_models() const {
    std::vector<ErrorModel> out;
    for (std::size_t j = 0; j < k(); ++j) out.push_back(error_model(j));
    return out;
  }

  ValueFunctionSpec value_spec() const {
    return {value_kind, std::vector<int>(k(), spec.max_magnitude)};
  }
  UtilityFunctionSpec utility_spec() const {
    return {utility_kind, utility_kind == UtilityKind::Exponential ? gamma : 0.0};
  }
  std::shared_ptr<const UtilityMap> utility_map() const {
    return std::make_shared<const UtilityMap>(value_spec(), utility_spec());
  }

  Instance with_preferences(ValueKind v, UtilityKind u) const {
    Instance copy = *this;
    copy.value_kind = v;
    copy.utility_kind = u;
    return copy;
  }
};

/// Draws true magnitudes that trade one anchor attribute off against the
/// others: x_h = 1 - sum_{j!=h} d_j x_j^alpha, then mu = 1 + floor(x·max).
/// The draw sequence does not depend on the preference kinds, so one seed
/// yields the same magnitudes under every value/utility combination.
inline Instance generate_instance(const ProblemSetSpec& spec, ValueKind vkind, UtilityKind ukind,
                                  std::uint64_t seed, std::size_t index = 0) {
  Rng rng(seed);
  Instance inst;
  inst.spec = spec;
  inst.index = index;
  inst.seed = seed;
  inst.value_kind = vkind;
  inst.utility_kind = ukind;
  const std::size_t k = spec.k;
  const std::size_t m = spec.m;

  inst.anchor_attr = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(k) - 1));
  inst.alpha = rng.uniform(1.0, 3.0);
  inst.weights.assign(k, 0.0);
  double csum = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    if (j == inst.anchor_attr) continue;
    inst.weights[j] = rng.uniform01();
    csum += inst.weights[j];
  }
  for (auto& d : inst.weights) d = csum > 0.0 ? d / csum : 0.0;
  if (!(csum > 0.0)) {
    // All c_j drew exactly 0: fall back to equal weights.
    for (std::size_t j = 0; j < k; ++j) inst.weights[j] = j == inst.anchor_attr ? 0.0 : 1.0 / (k - 1);
  }

  inst.mu.resize(m * k);
  std::vector<double> x(k);
  for (std::size_t i = 0; i < m; ++i) {
    double sub = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (j == inst.anchor_attr) continue;
      x[j] = rng.uniform01();
      sub += inst.weights[j] * std::pow(x[j], inst.alpha);
    }
    x[inst.anchor_attr] = 1.0 - sub;
    for (std::size_t j = 0; j < k; ++j) {
      const int raw = 1 + static_cast<int>(std::floor(x[j] * spec.max_magnitude));
      inst.mu[i * k + j] = std::clamp(raw, 1, spec.max_magnitude);
    }
  }

  inst.error_assignment.resize(k);
  std::iota(inst.error_assignment.begin(), inst.error_assignment.end(), std::size_t{0});
  for (std::size_t j = k; j-- > 1;) {
    const auto r = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(j)));
    std::swap(inst.error_assignment[j], inst.error_assignment[r]);
  }
  inst.gamma = rng.uniform(1.0, 10.0);
  return inst;
}

/// One measurement of pair (i, j): the true magnitude plus a drawn error.
/// The result may fall outside 1..max.
inline int draw_sample(const Instance& inst, std::size_t i, std::size_t j, Rng& rng) {
  const Pmf& err = inst.error_model(j).pmf();
  const double u = rng.uniform01();
  double acc = 0.0;
  std::size_t n = 0;
  for (; n + 1 < err.size(); ++n) {
    acc += err.prob_at(n);
    if (u < acc) break;
  }
  return inst.magnitude(i, j) + err.key(n);
}

}  // namespace sampalloc
