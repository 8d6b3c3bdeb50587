#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <span>
#include <stdexcept>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "alloc.hpp"
#include "errors.hpp"
#include "instances.hpp"
#include "rng.hpp"
#include "stats.hpp"
#include "trace.hpp"

namespace sampalloc {

inline std::uint64_t set_tag(const std::string& set) {
  std::uint64_t h = 0;
  for (unsigned char c : set) h = h * 131 + c;
  return h;
}

/// Seed of the sampling stream for one run. Rule and preference kinds are
/// deliberately left out: every policy with the same H sees the same draws
/// on a given instance and replication, whatever the value/utility cell.
inline std::uint64_t run_seed(std::uint64_t root, const CellKey& cell, std::size_t instance,
                              std::size_t replication, int uniform_phase) {
  return derive_seed(root, {set_tag(cell.set), instance, replication, static_cast<std::uint64_t>(uniform_phase)});
}

inline RunTrace run_one(const Instance& inst, const PolicyConfig& policy, std::size_t replication,
                        std::uint64_t root) {
  const CellKey cell{inst.spec.name, inst.value_kind, inst.utility_kind};
  Rng rng(run_seed(root, cell, inst.index, replication, policy.uniform_phase));
  RunTrace trace = run_policy(inst, policy, rng);
  trace.replication = replication;
  return trace;
}

/// Runs fn(0..n-1) on up to `workers` threads. The first exception stops
/// the hand-out of new items and is rethrown once all threads have joined.
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      if (failed.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
  pool.clear();  // joins
  if (error) std::rethrow_exception(error);
}

struct RunJob {
  const Instance* instance = nullptr;
  PolicyConfig policy;
  std::size_t replication = 0;
};

inline std::vector<RunJob> make_jobs(std::span<const Instance> instances, std::span<const PolicyConfig> policies,
                                     std::size_t replications) {
  std::vector<RunJob> jobs;
  jobs.reserve(instances.size() * policies.size() * replications);
  for (const auto& inst : instances) {
    for (const auto& p : policies) {
      for (std::size_t r = 0; r < replications; ++r) jobs.push_back({&inst, p, r});
    }
  }
  return jobs;
}

/// One trace per (instance, policy, replication), ordered that way
/// regardless of how many workers ran them.
inline std::vector<RunTrace> run_experiment(std::span<const Instance> instances, std::span<const PolicyConfig> policies,
                                            std::size_t replications, std::uint64_t root, std::size_t workers = 1) {
  if (instances.empty() || policies.empty() || replications == 0) {
    throw std::invalid_argument("experiment needs instances, policies and replications");
  }
  for (const auto& inst : instances) {
    for (const auto& p : policies) p.validate(inst.m(), inst.k());
  }
  const auto jobs = make_jobs(instances, policies, replications);
  std::vector<RunTrace> out(jobs.size());
  parallel_for(jobs.size(), workers, [&](std::size_t n) {
    const auto& job = jobs[n];
    out[n] = run_one(*job.instance, job.policy, job.replication, root);
  });
  return out;
}

// ---- aggregation ----

struct SummaryKey {
  CellKey cell;
  int uniform_phase = 0;
  Rule rule = Rule::I;
  int stage = 0;
  friend auto operator<=>(const SummaryKey&, const SummaryKey&) = default;
};

struct SummaryRow {
  SummaryKey key;
  std::size_t runs = 0;
  double mean_oc = 0.0;
  std::size_t correct = 0;
};

inline std::vector<SummaryRow> aggregate(std::span<const RunTrace> traces) {
  std::map<SummaryKey, std::pair<std::vector<double>, std::size_t>> acc;
  for (const auto& tr : traces) {
    for (const auto& s : tr.stages) {
      auto& slot = acc[{tr.cell, tr.policy.uniform_phase, tr.policy.rule, s.stage}];
      slot.first.push_back(s.oc);
      slot.second += s.correct ? 1 : 0;
    }
  }
  std::vector<SummaryRow> rows;
  rows.reserve(acc.size());
  for (auto& [key, v] : acc) {
    const std::size_t n = v.first.size();
    rows.push_back({key, n, stable_sum(std::move(v.first)) / static_cast<double>(n), v.second});
  }
  return rows;
}

/// Final-stage outcomes of a group of runs (one policy in one cell).
struct Outcomes {
  std::vector<double> oc;
  std::vector<bool> correct;

  std::size_t size() const { return oc.size(); }
  std::size_t correct_count() const { return static_cast<std::size_t>(std::count(correct.begin(), correct.end(), true)); }
};

inline Outcomes outcomes_at(std::span<const RunTrace> traces, int stage) {
  Outcomes o;
  for (const auto& tr : traces) {
    for (const auto& s : tr.stages) {
      if (s.stage != stage) continue;
      o.oc.push_back(s.oc);
      o.correct.push_back(s.correct);
    }
  }
  return o;
}

struct ComparisonResult {
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  double mean_oc_a = 0.0;
  double mean_oc_b = 0.0;
  WelchResult welch;     // on opportunity cost, a - b
  Verdict oc_verdict = Verdict::Indistinguishable;  // "better" = lower OC
  std::size_t correct_a = 0;
  std::size_t correct_b = 0;
  ProportionCi ci;       // on correct-selection proportion, a - b
  Verdict correct_verdict = Verdict::Indistinguishable;
};

inline constexpr double kSignificance = 0.05;

inline ComparisonResult compare(const Outcomes& a, const Outcomes& b) {
  if (a.size() < 2 || b.size() < 2) throw InsufficientData("comparison needs at least 2 runs per policy");
  ComparisonResult r;
  r.n_a = a.size();
  r.n_b = b.size();
  r.mean_oc_a = mean(a.oc);
  r.mean_oc_b = mean(b.oc);
  r.welch = welch_test(a.oc, b.oc);
  if (r.welch.p < kSignificance) r.oc_verdict = r.welch.diff < 0 ? Verdict::Better : Verdict::Worse;
  r.correct_a = a.correct_count();
  r.correct_b = b.correct_count();
  r.ci = proportion_diff_ci(r.correct_a, r.n_a, r.correct_b, r.n_b, 1.0 - kSignificance);
  if (r.ci.lo > 0.0) r.correct_verdict = Verdict::Better;
  else if (r.ci.hi < 0.0) r.correct_verdict = Verdict::Worse;
  return r;
}

// ---- sampling behaviour ----

/// Alternatives ordered by true utility, best first; lower index first on ties.
inline std::vector<std::size_t> utility_ranking(std::span<const double> xi) {
  std::vector<std::size_t> order(xi.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xi[a] > xi[b]; });
  return order;
}

struct SamplingSummary {
  std::size_t runs = 0;
  double mean_distinct_pairs = 0.0;
  std::vector<double> rank_share;  // by true-utility rank, best first
  std::vector<double> attr_share;
  std::vector<double> pair_share;  // rank-major m×k
};

/// Sample shares pooled over runs (all runs must share m and k).
inline SamplingSummary sampling_behavior(std::span<const RunTrace> traces) {
  SamplingSummary s;
  if (traces.empty()) return s;
  const std::size_t m = traces.front().m, k = traces.front().k;
  s.rank_share.assign(m, 0.0);
  s.attr_share.assign(k, 0.0);
  s.pair_share.assign(m * k, 0.0);
  std::vector<double> distinct;
  double total = 0.0;
  for (const auto& tr : traces) {
    if (tr.m != m || tr.k != k) throw std::invalid_argument("sampling summary over runs of different shapes");
    const auto order = utility_ranking(tr.true_utilities);
    std::vector<std::size_t> rank_of(m);
    for (std::size_t r = 0; r < m; ++r) rank_of[order[r]] = r;
    const auto counts = tr.counts();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        const double c = counts.at(i, j);
        s.rank_share[rank_of[i]] += c;
        s.attr_share[j] += c;
        s.pair_share[rank_of[i] * k + j] += c;
        total += c;
      }
    }
    distinct.push_back(static_cast<double>(counts.distinct_pairs()));
  }
  s.runs = traces.size();
  s.mean_distinct_pairs = mean(distinct);
  if (total > 0) {
    for (auto* v : {&s.rank_share, &s.attr_share, &s.pair_share}) {
      for (auto& x : *v) x /= total;
    }
  }
  return s;
}

/// Groups traces by (cell, H, rule), in key order.
using PolicyKey = std::tuple<CellKey, int, Rule>;

inline std::map<PolicyKey, std::vector<RunTrace>> group_by_policy(std::vector<RunTrace> traces) {
  std::map<PolicyKey, std::vector<RunTrace>> out;
  for (auto& tr : traces) out[{tr.cell, tr.policy.uniform_phase, tr.policy.rule}].push_back(std::move(tr));
  return out;
}

inline double mean_run_ms(std::span<const RunTrace> traces) {
  std::vector<double> ms;
  ms.reserve(traces.size());
  for (const auto& tr : traces) ms.push_back(tr.total_ms());
  return mean(ms);
}

}  // namespace sampalloc
