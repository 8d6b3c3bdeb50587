#pragma once

#include <algorithm>
#include <chrono>
#include <optional>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "belief.hpp"
#include "instances.hpp"
#include "pmf.hpp"
#include "preference.hpp"
#include "rng.hpp"
#include "trace.hpp"

namespace sampalloc {

struct Pair {
  std::size_t alt = 0;
  std::size_t attr = 0;
  friend bool operator==(const Pair&, const Pair&) = default;
};

/// Uniform phase of length H: every pair H/(m·k) times, one full sweep over
/// the alternatives for attribute 1, then attribute 2, ..., before any pair repeats.
inline std::vector<Pair> uniform_schedule(std::size_t m, std::size_t k, int h) {
  if (h < 0) throw std::invalid_argument("uniform phase must be non-negative");
  const auto km = static_cast<int>(m * k);
  if (km == 0 || h % km != 0) {
    throw NotMultiple("uniform phase " + std::to_string(h) + " is not a multiple of m*k = " + std::to_string(km));
  }
  std::vector<Pair> out;
  out.reserve(static_cast<std::size_t>(h));
  for (int cycle = 0; cycle < h / km; ++cycle) {
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t i = 0; i < m; ++i) out.push_back({i, j});
    }
  }
  return out;
}

class ScoreMatrix {
 public:
  ScoreMatrix(std::size_t m, std::size_t k) : m_(m), k_(k), v_(m * k, 0.0) {}
  double& at(std::size_t i, std::size_t j) { return v_[i * k_ + j]; }
  double at(std::size_t i, std::size_t j) const { return v_[i * k_ + j]; }
  std::size_t m() const { return m_; }
  std::size_t k() const { return k_; }
  std::span<const double> values() const& { return v_; }
  std::vector<double> values() && { return std::move(v_); }

 private:
  std::size_t m_;
  std::size_t k_;
  std::vector<double> v_;
};

/// Row-major argmax: lowest alternative, then lowest attribute, wins ties.
inline Pair next_pair(const ScoreMatrix& scores) {
  const std::size_t n = argmax_lowest(scores.values());
  return {n / scores.k(), n % scores.k()};
}

namespace detail {

// Law of alternative i's lattice key with attribute j left out.
inline Pmf partial_utility(const BeliefState& s, std::size_t i, std::size_t j) {
  const auto& lattice = s.utility_map().lattice();
  std::optional<Pmf> acc;
  for (std::size_t g = 0; g < s.k(); ++g) {
    if (g == j) continue;
    Pmf c = contribution_pmf(lattice, g, s.magnitude(i, g));
    acc = acc ? convolve(*acc, c) : std::move(c);
  }
  return *acc;
}

// F = sum_w max_h sum_x p(x) e(w - x) coef[h][x]. Every one-step quantity used
// here (E[Z_h] or P_h after the sample) is linear in the posterior of Y_ij,
// so the posterior average over w reduces to this form without division.
inline double expected_max(const Pmf& belief, const ErrorModel& error, std::span<const double> coef,
                           std::size_t rows) {
  const std::size_t nx = belief.size();
  const auto offsets = error.offsets();
  const int wlo = belief.min_key() + offsets.front();
  const int whi = belief.max_key() + offsets.back();
  std::vector<double> like(nx);
  double total = 0.0;
  for (int w = wlo; w <= whi; ++w) {
    bool any = false;
    for (std::size_t x = 0; x < nx; ++x) {
      like[x] = belief.prob_at(x) * error(w - belief.key(x));
      any = any || like[x] > 0.0;
    }
    if (!any) continue;
    double best = -1.0;
    for (std::size_t h = 0; h < rows; ++h) {
      const double* row = &coef[h * nx];
      double acc = 0.0;
      for (std::size_t x = 0; x < nx; ++x) acc += like[x] * row[x];
      best = std::max(best, acc);
    }
    total += best;
  }
  return total;
}

inline ScoreMatrix scores_rule_I(const BeliefState& s, std::span<const ErrorModel> errors) {
  const std::size_t m = s.m(), k = s.k();
  const auto& umap = s.utility_map();
  const auto& lattice = umap.lattice();
  const auto eu = s.expected_utilities();
  ScoreMatrix out(m, k);
  std::vector<double> coef;
  for (std::size_t i = 0; i < m; ++i) {
    double other = -1.0;
    for (std::size_t h = 0; h < m; ++h) {
      if (h != i) other = std::max(other, eu[h]);
    }
    for (std::size_t j = 0; j < k; ++j) {
      const Pmf& belief = s.magnitude(i, j);
      const Pmf partial = partial_utility(s, i, j);
      const std::size_t nx = belief.size();
      // Row 0: E[Z_i | Y_ij = x]. Row 1: best competitor, unaffected by the sample.
      coef.assign(2 * nx, other);
      for (std::size_t x = 0; x < nx; ++x) {
        const int c = lattice.contribution(j, belief.key(x));
        double acc = 0.0;
        for (std::size_t n = 0; n < partial.size(); ++n) acc += partial.prob_at(n) * umap(partial.key(n) + c);
        coef[x] = acc;
      }
      out.at(i, j) = expected_max(belief, errors[j], coef, other < 0.0 ? 1 : 2);
    }
  }
  return out;
}

inline ScoreMatrix scores_rule_II(const BeliefState& s, std::span<const ErrorModel> errors) {
  const std::size_t m = s.m(), k = s.k();
  const auto& lattice = s.utility_map().lattice();
  const auto dists = s.utility_dists();
  const CdfGrid grid(dists);
  const std::size_t width = grid.width();

  ScoreMatrix out(m, k);
  std::vector<double> before(m * width), after(m * width);
  std::vector<double> beat(width);
  std::vector<std::vector<double>> weighted(m);  // p_h(z) · prod_{g != h, i} CDF_g(z) on supp Z_h
  std::vector<std::vector<double>> weighted_tail(m);  // suffix sums of weighted[h]
  std::vector<std::size_t> active;
  std::vector<double> coef;
  std::vector<double> part_le, part_lt;

  for (std::size_t i = 0; i < m; ++i) {
    // Prefix/suffix products over competitors with alternative i left out.
    // For rival h: g < h contributes P{Z_g < z}, g > h contributes P{Z_g <= z}.
    std::fill(before.begin(), before.end(), 1.0);
    std::fill(after.begin(), after.end(), 1.0);
    for (std::size_t h = 1; h < m; ++h) {
      double* dst = &before[h * width];
      const double* prev = &before[(h - 1) * width];
      if (h - 1 == i) {
        std::copy(prev, prev + width, dst);
        continue;
      }
      auto lt = grid.lt(h - 1);
      for (std::size_t z = 0; z < width; ++z) dst[z] = prev[z] * lt[z];
    }
    for (std::size_t h = m - 1; h-- > 0;) {
      double* dst = &after[h * width];
      const double* next = &after[(h + 1) * width];
      if (h + 1 == i) {
        std::copy(next, next + width, dst);
        continue;
      }
      auto le = grid.le(h + 1);
      for (std::size_t z = 0; z < width; ++z) dst[z] = next[z] * le[z];
    }
    // Probability that i beats every rival given Z_i = z.
    for (std::size_t z = 0; z < width; ++z) beat[z] = before[i * width + z] * after[i * width + z];

    active.clear();
    for (std::size_t h = 0; h < m; ++h) {
      if (h == i) continue;
      const auto& d = dists[h];
      auto& wv = weighted[h];
      wv.resize(d.size());
      bool any = false;
      for (std::size_t n = 0; n < d.size(); ++n) {
        const std::size_t z = grid.index(d.key(n));
        wv[n] = d.prob_at(n) * before[h * width + z] * after[h * width + z];
        any = any || wv[n] > 0.0;
      }
      // A rival that some other alternative surely beats stays at P_h = 0.
      if (!any) continue;
      active.push_back(h);
      auto& tail = weighted_tail[h];
      tail.assign(d.size() + 1, 0.0);
      for (std::size_t n = d.size(); n-- > 0;) tail[n] = tail[n + 1] + wv[n];
    }

    for (std::size_t j = 0; j < k; ++j) {
      const Pmf& belief = s.magnitude(i, j);
      const Pmf partial = partial_utility(s, i, j);
      const std::size_t nx = belief.size();
      const int plo = partial.min_key();
      const auto pw = static_cast<std::size_t>(partial.max_key() - plo + 1);
      part_le.assign(pw, 0.0);
      part_lt.assign(pw, 0.0);
      {
        double acc = 0.0;
        std::size_t n = 0;
        for (std::size_t z = 0; z < pw; ++z) {
          part_lt[z] = acc;
          if (n < partial.size() && partial.key(n) == plo + static_cast<int>(z)) acc += partial.prob_at(n++);
          part_le[z] = acc;
        }
      }

      const std::size_t rows = 1 + active.size();
      coef.assign(rows * nx, 0.0);
      for (std::size_t x = 0; x < nx; ++x) {
        const int c = lattice.contribution(j, belief.key(x));
        double acc = 0.0;
        for (std::size_t n = 0; n < partial.size(); ++n) {
          acc += partial.prob_at(n) * beat[grid.index(partial.key(n) + c)];
        }
        coef[x] = acc;
        for (std::size_t r = 0; r < active.size(); ++r) {
          const std::size_t h = active[r];
          const auto& d = dists[h];
          const auto& wv = weighted[h];
          // P{Z_i' < z} if i < h else P{Z_i' <= z}, with Z_i' = partial + c. It is
          // 0 below key c + plo, 1 above c + plo + pw - 1, explicit in between.
          const auto& cdf = i < h ? part_lt : part_le;
          const auto keys = d.support();
          const auto first = static_cast<std::size_t>(
              std::lower_bound(keys.begin(), keys.end(), c + plo) - keys.begin());
          const auto last = static_cast<std::size_t>(
              std::lower_bound(keys.begin() + static_cast<std::ptrdiff_t>(first), keys.end(),
                               c + plo + static_cast<int>(pw)) - keys.begin());
          double sum = weighted_tail[h][last];
          for (std::size_t n = first; n < last; ++n) {
            sum += wv[n] * cdf[static_cast<std::size_t>(keys[n] - c - plo)];
          }
          coef[(r + 1) * nx + x] = sum;
        }
      }
      out.at(i, j) = expected_max(belief, errors[j], coef, rows);
    }
  }
  return out;
}

}  // namespace detail

/// One-step lookahead value F_ij for every pair: the expectation, over the
/// predictive law of the next sample of (i, j), of the best expected utility
/// (rule I) or the best probability of being best (rule II) after the update.
/// `errors` holds one error model per attribute.
inline ScoreMatrix lookahead_scores(const BeliefState& s, std::span<const ErrorModel> errors, Rule rule) {
  if (errors.size() != s.k()) throw std::invalid_argument("need one error model per attribute");
  return rule == Rule::I ? detail::scores_rule_I(s, errors) : detail::scores_rule_II(s, errors);
}

inline std::size_t select(const BeliefState& s, Rule rule) {
  return rule == Rule::I ? s.select_rule_I() : s.select_rule_II();
}

/// Runs one hybrid procedure on an instance: the first H samples follow the
/// uniform schedule, the rest go to the lookahead-best pair. Every stage logs
/// the alternative the rule would select at that point.
inline RunTrace run_policy(const Instance& inst, const PolicyConfig& config, Rng& rng) {
  using Clock = std::chrono::steady_clock;
  const std::size_t m = inst.m(), k = inst.k();
  config.validate(m, k);
  const auto umap = inst.utility_map();
  const auto truth = true_utilities(inst.mu, *umap);
  const auto errors = inst.error_models();
  const auto schedule = uniform_schedule(m, k, config.uniform_phase);

  RunTrace trace;
  trace.cell = {inst.spec.name, inst.value_kind, inst.utility_kind};
  trace.instance = inst.index;
  trace.policy = config;
  trace.m = m;
  trace.k = k;
  trace.true_utilities = truth.xi;
  trace.stages.reserve(static_cast<std::size_t>(config.budget));

  const auto start = Clock::now();
  BeliefState state = BeliefState::uniform(m, umap);
  AllocationCounts counts(m, k);
  for (int t = 1; t <= config.budget; ++t) {
    const Pair p = t <= config.uniform_phase ? schedule[static_cast<std::size_t>(t - 1)]
                                             : next_pair(lookahead_scores(state, errors, config.rule));
    const int w = draw_sample(inst, p.alt, p.attr, rng);
    state.apply_sample(p.alt, p.attr, w, errors[p.attr]);
    counts.add(p.alt, p.attr);
    const std::size_t b = select(state, config.rule);

    StageRecord rec;
    rec.stage = t;
    rec.alt = static_cast<int>(p.alt);
    rec.attr = static_cast<int>(p.attr);
    rec.sample = w;
    rec.selected = static_cast<int>(b);
    rec.correct = truth.is_best(b);
    rec.oc = rec.correct ? 0.0 : truth.best - truth.xi[b];
    rec.entropy = allocation_entropy(counts, t);
    rec.ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    trace.stages.push_back(rec);
  }
  return trace;
}

}  // namespace sampalloc
