#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "preference.hpp"

namespace sampalloc {

enum class Rule { I, II };

inline std::string to_string(Rule r) { return r == Rule::I ? "I" : "II"; }
inline Rule parse_rule(const std::string& s) {
  if (s == "I" || s == "1") return Rule::I;
  if (s == "II" || s == "2") return Rule::II;
  throw std::invalid_argument("unknown decision rule '" + s + "' (expected I or II)");
}

/// Total budget T, uniform-phase length H and decision rule. H = 0 is fully
/// sequential, H = T is the pure uniform procedure.
struct PolicyConfig {
  int budget = 180;
  int uniform_phase = 0;
  Rule rule = Rule::I;

  void validate(std::size_t m, std::size_t k) const {
    if (budget < 1) throw std::invalid_argument("budget must be positive");
    if (uniform_phase < 0 || uniform_phase > budget) {
      throw std::invalid_argument("uniform phase must lie in [0, budget]");
    }
    const auto km = static_cast<int>(m * k);
    if (uniform_phase % km != 0) {
      throw NotMultiple("uniform phase " + std::to_string(uniform_phase) + " is not a multiple of m*k = " +
                        std::to_string(km));
    }
  }

  friend bool operator==(const PolicyConfig&, const PolicyConfig&) = default;
};

inline std::string policy_label(const PolicyConfig& p) {
  std::string h = std::to_string(p.uniform_phase);
  while (h.size() < 3) h.insert(h.begin(), '0');
  return "H" + h + "_" + to_string(p.rule);
}

/// Problem set plus the value/utility combination a run was evaluated under.
struct CellKey {
  std::string set = "A";
  ValueKind value = ValueKind::Additive;
  UtilityKind utility = UtilityKind::RiskNeutral;

  friend auto operator<=>(const CellKey&, const CellKey&) = default;
};

inline std::string cell_label(const CellKey& c) {
  return c.set + "_" + to_string(c.value) + "_" + to_string(c.utility);
}

/// Sample counts N_ij, row-major m×k.
class AllocationCounts {
 public:
  AllocationCounts(std::size_t m, std::size_t k) : m_(m), k_(k), n_(m * k, 0) {}

  void add(std::size_t i, std::size_t j) {
    ++n_[i * k_ + j];
    ++total_;
  }
  int at(std::size_t i, std::size_t j) const { return n_[i * k_ + j]; }
  int total() const { return total_; }
  std::size_t m() const { return m_; }
  std::size_t k() const { return k_; }
  const std::vector<int>& counts() const& { return n_; }
  std::vector<int> counts() && { return std::move(n_); }

  std::size_t distinct_pairs() const {
    std::size_t d = 0;
    for (int c : n_) d += c > 0 ? 1 : 0;
    return d;
  }

 private:
  std::size_t m_;
  std::size_t k_;
  std::vector<int> n_;
  int total_ = 0;
};

/// -sum (N_ij/t) ln(N_ij/t) over all pairs, with 0 ln 0 = 0.
inline double allocation_entropy(const AllocationCounts& counts, int t) {
  if (t <= 0) throw std::invalid_argument("entropy needs at least one sample");
  double h = 0.0;
  for (int c : counts.counts()) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / t;
    h -= p * std::log(p);
  }
  return h;
}

struct StageRecord {
  int stage = 0;
  int alt = 0;  // 0-based internally
  int attr = 0;
  int sample = 0;
  int selected = 0;
  double oc = 0.0;
  bool correct = false;
  double entropy = 0.0;
  double ms = 0.0;  // cumulative wall time
};

struct RunTrace {
  CellKey cell;
  std::size_t instance = 0;
  std::size_t replication = 0;
  PolicyConfig policy;
  std::size_t m = 0;
  std::size_t k = 0;
  std::vector<double> true_utilities;
  std::vector<StageRecord> stages;

  const StageRecord& final_stage() const { return stages.back(); }
  double total_ms() const { return stages.empty() ? 0.0 : stages.back().ms; }

  AllocationCounts counts() const {
    AllocationCounts c(m, k);
    for (const auto& s : stages) c.add(static_cast<std::size_t>(s.alt), static_cast<std::size_t>(s.attr));
    return c;
  }
};

}  // namespace sampalloc
