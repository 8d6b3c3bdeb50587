#pragma once

#include <algorithm>
#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pmf.hpp"
#include "preference.hpp"

namespace sampalloc {

/// Index of the largest entry; the lowest index wins exact ties. This is the
/// single tie-break used for every argmax (selection rules and pair choice).
/// Values are compared as computed, with no tolerance.
inline std::size_t argmax_lowest(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("argmax of an empty range");
  std::size_t best = 0;
  for (std::size_t n = 1; n < xs.size(); ++n) {
    if (xs[n] > xs[best]) best = n;
  }
  return best;
}

/// Dense CDFs of several key distributions on a shared integer grid.
class CdfGrid {
 public:
  explicit CdfGrid(std::span<const Pmf> dists) {
    lo_ = dists.front().min_key();
    int hi = dists.front().max_key();
    for (const auto& d : dists) {
      lo_ = std::min(lo_, d.min_key());
      hi = std::max(hi, d.max_key());
    }
    width_ = static_cast<std::size_t>(hi - lo_ + 1);
    le_.assign(dists.size() * width_, 0.0);
    lt_.assign(dists.size() * width_, 0.0);
    for (std::size_t g = 0; g < dists.size(); ++g) {
      double* le = &le_[g * width_];
      double* lt = &lt_[g * width_];
      std::size_t n = 0;
      double acc = 0.0;
      const auto& d = dists[g];
      for (std::size_t z = 0; z < width_; ++z) {
        lt[z] = acc;
        const int key = lo_ + static_cast<int>(z);
        if (n < d.size() && d.key(n) == key) acc += d.prob_at(n++);
        le[z] = std::min(acc, 1.0);
      }
    }
  }

  int lo() const { return lo_; }
  std::size_t width() const { return width_; }
  std::size_t count() const { return le_.size() / width_; }
  std::size_t index(int key) const { return static_cast<std::size_t>(key - lo_); }

  // P{Z_g <= key} and P{Z_g < key} for keys on the grid.
  std::span<const double> le(std::size_t g) const { return {&le_[g * width_], width_}; }
  std::span<const double> lt(std::size_t g) const { return {&lt_[g * width_], width_}; }

 private:
  int lo_ = 0;
  std::size_t width_ = 0;
  std::vector<double> le_;
  std::vector<double> lt_;
};

/// Probability that each alternative is best under the tie-break order where
/// a lower index wins equal utilities. Utilities are compared on lattice keys.
inline std::vector<double> prob_best(std::span<const Pmf> utility_dists) {
  const std::size_t m = utility_dists.size();
  const CdfGrid grid(utility_dists);
  const std::size_t w = grid.width();
  // before[h][z] = prod_{g<h} P{Z_g < z};  after[h][z] = prod_{g>h} P{Z_g <= z}
  std::vector<double> before(m * w, 1.0);
  std::vector<double> after(m * w, 1.0);
  for (std::size_t h = 1; h < m; ++h) {
    auto lt = grid.lt(h - 1);
    for (std::size_t z = 0; z < w; ++z) before[h * w + z] = before[(h - 1) * w + z] * lt[z];
  }
  for (std::size_t h = m - 1; h-- > 0;) {
    auto le = grid.le(h + 1);
    for (std::size_t z = 0; z < w; ++z) after[h * w + z] = after[(h + 1) * w + z] * le[z];
  }
  std::vector<double> out(m, 0.0);
  for (std::size_t h = 0; h < m; ++h) {
    const auto& d = utility_dists[h];
    double acc = 0.0;
    for (std::size_t n = 0; n < d.size(); ++n) {
      const std::size_t z = grid.index(d.key(n));
      acc += d.prob_at(n) * before[h * w + z] * after[h * w + z];
    }
    out[h] = acc;
  }
  return out;
}

/// The decision-maker's beliefs after t samples: independent magnitude pmfs
/// for every (alternative, attribute) plus each alternative's utility law.
class BeliefState {
 public:
  BeliefState(std::size_t m, std::vector<Pmf> magnitude_beliefs, std::shared_ptr<const UtilityMap> umap)
      : m_(m), umap_(std::move(umap)), magnitudes_(std::move(magnitude_beliefs)) {
    if (!umap_) throw std::invalid_argument("BeliefState needs a utility map");
    if (m_ < 1) throw std::invalid_argument("BeliefState needs at least one alternative");
    if (magnitudes_.size() != m_ * k()) throw std::invalid_argument("need m*k magnitude beliefs");
    utilities_.reserve(m_);
    for (std::size_t i = 0; i < m_; ++i) utilities_.push_back(build_utility(i));
  }

  /// Uniform prior on 1..max_j for every pair.
  static BeliefState uniform(std::size_t m, std::shared_ptr<const UtilityMap> umap) {
    if (!umap) throw std::invalid_argument("BeliefState needs a utility map");
    const auto& maxes = umap->value_spec().max_magnitudes;
    std::vector<Pmf> priors;
    priors.reserve(m * maxes.size());
    for (std::size_t i = 0; i < m; ++i) {
      for (int mx : maxes) priors.push_back(Pmf::uniform(1, mx));
    }
    return BeliefState(m, std::move(priors), std::move(umap));
  }

  std::size_t stage() const { return stage_; }
  std::size_t m() const { return m_; }
  std::size_t k() const { return umap_->k(); }
  const UtilityMap& utility_map() const { return *umap_; }
  const std::shared_ptr<const UtilityMap>& utility_map_ptr() const { return umap_; }

  const Pmf& magnitude(std::size_t i, std::size_t j) const { return magnitudes_[i * k() + j]; }
  std::span<const Pmf> magnitudes(std::size_t i) const { return {&magnitudes_[i * k()], k()}; }
  const Pmf& utility_dist(std::size_t i) const { return utilities_[i]; }
  std::span<const Pmf> utility_dists() const { return utilities_; }

  /// Bayes update of pair (i, j) with sample w; only row i's utility law is rebuilt.
  void apply_sample(std::size_t i, std::size_t j, int w, const ErrorModel& error) {
    check_pair(i, j);
    magnitudes_[i * k() + j] = bayes_update(magnitude(i, j), error, w);
    utilities_[i] = build_utility(i);
    ++stage_;
  }

  BeliefState with_sample(std::size_t i, std::size_t j, int w, const ErrorModel& error) const {
    BeliefState next = *this;
    next.apply_sample(i, j, w, error);
    return next;
  }

  // Overrides the stage counter (checkpoint restore).
  void set_stage(std::size_t t) { stage_ = t; }

  std::vector<double> expected_utilities() const {
    std::vector<double> out(m_);
    for (std::size_t i = 0; i < m_; ++i) out[i] = utilities_[i].expectation(*umap_);
    return out;
  }

  std::vector<double> prob_best() const { return sampalloc::prob_best(utilities_); }

  // Rule I: greatest expected utility.
  std::size_t select_rule_I() const { return argmax_lowest(expected_utilities()); }
  // Rule II: greatest probability of being best.
  std::size_t select_rule_II() const { return argmax_lowest(prob_best()); }

 private:
  Pmf build_utility(std::size_t i) const { return utility_distribution(magnitudes(i), umap_->lattice()); }

  void check_pair(std::size_t i, std::size_t j) const {
    if (i >= m_ || j >= k()) throw OutOfRange("alternative/attribute index out of range");
  }

  std::size_t m_;
  std::size_t stage_ = 0;
  std::shared_ptr<const UtilityMap> umap_;
  std::vector<Pmf> magnitudes_;
  std::vector<Pmf> utilities_;
};

}  // namespace sampalloc
