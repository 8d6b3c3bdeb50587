#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace sampalloc {

inline constexpr double kProbTol = 1e-12;

/// Finite probability mass function over an integer-keyed support.
///
/// Keys are strictly increasing and every stored probability is positive:
/// zero entries are pruned and the masses are renormalized on construction.
class Pmf {
 public:
  Pmf(std::vector<int> support, std::vector<double> probs) {
    if (support.size() != probs.size()) {
      throw std::invalid_argument("Pmf: support and probability lengths differ");
    }
    double total = 0.0;
    for (std::size_t n = 0; n < support.size(); ++n) {
      if (n > 0 && support[n] <= support[n - 1]) {
        throw std::invalid_argument("Pmf: support keys must be strictly increasing");
      }
      if (!(probs[n] >= 0.0) || !std::isfinite(probs[n])) {
        throw std::invalid_argument("Pmf: probabilities must be finite and non-negative");
      }
      total += probs[n];
    }
    if (!(total > 0.0)) throw std::invalid_argument("Pmf: total mass must be positive");
    keys_.reserve(support.size());
    probs_.reserve(support.size());
    for (std::size_t n = 0; n < support.size(); ++n) {
      if (probs[n] > 0.0) {
        keys_.push_back(support[n]);
        probs_.push_back(probs[n] / total);
      }
    }
  }

  // Stores already-normalized masses verbatim (no division), so a pmf read
  // back from its own printed digits compares equal to the original.
  static Pmf from_normalized(std::vector<int> support, std::vector<double> probs) {
    Pmf p(support, probs);
    double total = 0.0;
    for (double q : probs) total += q;
    if (std::abs(total - 1.0) > kProbTol) throw std::invalid_argument("Pmf: masses do not sum to 1");
    p.probs_.clear();
    for (double q : probs) {
      if (q > 0.0) p.probs_.push_back(q);
    }
    return p;
  }

  static Pmf point_mass(int key) { return Pmf({key}, {1.0}); }

  // Uniform on the integer range [lo, hi].
  static Pmf uniform(int lo, int hi) {
    if (hi < lo) throw std::invalid_argument("Pmf::uniform: empty range");
    const auto n = static_cast<std::size_t>(hi - lo + 1);
    std::vector<int> keys(n);
    std::iota(keys.begin(), keys.end(), lo);
    return Pmf(std::move(keys), std::vector<double>(n, 1.0));
  }

  // Builds a pmf from dense masses where dense[n] is the mass of key offset + n.
  static Pmf from_dense(int offset, std::span<const double> dense) {
    std::vector<int> keys;
    std::vector<double> probs;
    for (std::size_t n = 0; n < dense.size(); ++n) {
      if (dense[n] > 0.0) {
        keys.push_back(offset + static_cast<int>(n));
        probs.push_back(dense[n]);
      }
    }
    return Pmf(std::move(keys), std::move(probs));
  }

  std::span<const int> support() const { return keys_; }
  std::span<const double> probs() const { return probs_; }
  std::size_t size() const { return keys_.size(); }
  int min_key() const { return keys_.front(); }
  int max_key() const { return keys_.back(); }
  int key(std::size_t n) const { return keys_[n]; }
  double prob_at(std::size_t n) const { return probs_[n]; }

  // Probability of a key; 0 when the key is not in the support.
  double operator()(int key) const {
    auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
    if (it == keys_.end() || *it != key) return 0.0;
    return probs_[static_cast<std::size_t>(it - keys_.begin())];
  }

  // P{K <= z}.
  double cdf(double z) const {
    double acc = 0.0;
    for (std::size_t n = 0; n < keys_.size() && keys_[n] <= z; ++n) acc += probs_[n];
    return acc;
  }

  // P{K < z}.
  double cdf_strict(double z) const {
    double acc = 0.0;
    for (std::size_t n = 0; n < keys_.size() && keys_[n] < z; ++n) acc += probs_[n];
    return acc;
  }

  template <typename F>
  double expectation(F&& key_to_real) const {
    double acc = 0.0;
    for (std::size_t n = 0; n < keys_.size(); ++n) acc += key_to_real(keys_[n]) * probs_[n];
    return acc;
  }

  double mean() const {
    return expectation([](int k) { return static_cast<double>(k); });
  }

  double total() const { return std::accumulate(probs_.begin(), probs_.end(), 0.0); }

  // Relabels keys through a strictly increasing map.
  template <typename F>
  Pmf map_keys(F&& increasing) const {
    std::vector<int> keys(keys_.size());
    for (std::size_t n = 0; n < keys_.size(); ++n) keys[n] = increasing(keys_[n]);
    return Pmf(std::move(keys), probs_);
  }

  friend bool operator==(const Pmf&, const Pmf&) = default;

 private:
  Pmf() = default;

  std::vector<int> keys_;
  std::vector<double> probs_;
};

/// Distribution of the sum of two independent integer-valued variables.
inline Pmf convolve(const Pmf& a, const Pmf& b) {
  const int lo = a.min_key() + b.min_key();
  std::vector<double> dense(static_cast<std::size_t>(a.max_key() + b.max_key() - lo + 1), 0.0);
  for (std::size_t x = 0; x < a.size(); ++x) {
    const double pa = a.prob_at(x);
    const int base = a.key(x) - lo;
    for (std::size_t y = 0; y < b.size(); ++y) {
      dense[static_cast<std::size_t>(base + b.key(y))] += pa * b.prob_at(y);
    }
  }
  return Pmf::from_dense(lo, dense);
}

/// Symmetric measurement-error distribution over integer offsets.
class ErrorModel {
 public:
  explicit ErrorModel(Pmf pmf, double documented_std_dev = 0.0)
      : pmf_(std::move(pmf)), documented_std_dev_(documented_std_dev) {
    const double peak = pmf_(0);
    for (std::size_t n = 0; n < pmf_.size(); ++n) {
      const int e = pmf_.key(n);
      if (std::abs(pmf_.prob_at(n) - pmf_(-e)) > kProbTol) {
        std::ostringstream msg;
        msg << "ErrorModel: not symmetric about 0 at offset " << e;
        throw std::invalid_argument(msg.str());
      }
      if (pmf_.prob_at(n) > peak + kProbTol) {
        throw std::invalid_argument("ErrorModel: p(0) must be the largest probability");
      }
    }
  }

  static ErrorModel exact() { return ErrorModel(Pmf::point_mass(0), 0.0); }

  const Pmf& pmf() const { return pmf_; }
  std::span<const int> offsets() const { return pmf_.support(); }
  double operator()(int offset) const { return pmf_(offset); }
  double documented_std_dev() const { return documented_std_dev_; }

  double std_dev() const {
    const double mean = pmf_.mean();
    const double var = pmf_.expectation([mean](int e) { return (e - mean) * (e - mean); });
    return std::sqrt(var);
  }

 private:
  Pmf pmf_;
  double documented_std_dev_;
};

/// Posterior over magnitudes after observing `sample`, the magnitude plus an error.
inline Pmf bayes_update(const Pmf& prior, const ErrorModel& error, int sample) {
  std::vector<int> keys;
  std::vector<double> mass;
  keys.reserve(prior.size());
  mass.reserve(prior.size());
  double total = 0.0;
  for (std::size_t n = 0; n < prior.size(); ++n) {
    const double like = error(sample - prior.key(n));
    if (like > 0.0) {
      keys.push_back(prior.key(n));
      mass.push_back(prior.prob_at(n) * like);
      total += mass.back();
    }
  }
  if (!(total > 0.0)) {
    std::ostringstream msg;
    msg << "bayes_update: sample " << sample << " is impossible under the current belief";
    throw ZeroLikelihood(msg.str());
  }
  return Pmf(std::move(keys), std::move(mass));
}

/// Predictive distribution of the next sample: belief convolved with the error.
inline Pmf predictive_sample_dist(const Pmf& belief, const ErrorModel& error) {
  return convolve(belief, error.pmf());
}

}  // namespace sampalloc
