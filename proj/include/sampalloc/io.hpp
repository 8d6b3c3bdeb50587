#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "belief.hpp"
#include "instances.hpp"
#include "sim.hpp"
#include "trace.hpp"

namespace sampalloc {

namespace fs = std::filesystem;
using json = nlohmann::json;

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// ---- formatting ----

inline std::string fmt_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string fmt_fixed(double x, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
  return buf;
}

inline std::string zero_pad(std::size_t n, int width = 2) {
  std::string s = std::to_string(n);
  while (s.size() < static_cast<std::size_t>(width)) s.insert(s.begin(), '0');
  return s;
}

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes via a sibling temp file and rename, so readers never see a partial file.
inline void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw IoError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

// ---- cells ----

inline CellKey parse_cell_label(const std::string& label) {
  const auto parts = split(label, '_');
  if (parts.size() != 3) throw std::invalid_argument("bad cell label '" + label + "'");
  return {parts[0], parse_value_kind(parts[1]), parse_utility_kind(parts[2])};
}

// ---- instances ----

inline json instance_to_json(const Instance& inst) {
  json mu = json::array();
  for (std::size_t i = 0; i < inst.m(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < inst.k(); ++j) row.push_back(inst.magnitude(i, j));
    mu.push_back(row);
  }
  return {
      {"set", inst.spec.name},
      {"index", inst.index},
      {"seed", inst.seed},
      {"m", inst.m()},
      {"k", inst.k()},
      {"max_magnitude", inst.spec.max_magnitude},
      {"mu", mu},
      {"error_rows", inst.error_assignment},
      {"gamma", inst.gamma},
      {"anchor_attr", inst.anchor_attr},
      {"alpha", inst.alpha},
      {"weights", inst.weights},
  };
}

/// Preference kinds are not part of the file: one instance serves every cell.
inline Instance instance_from_json(const json& j, ValueKind v = ValueKind::Additive,
                                   UtilityKind u = UtilityKind::RiskNeutral) {
  Instance inst;
  inst.spec = problem_set(j.at("set").get<std::string>());
  if (j.at("m").get<std::size_t>() != inst.spec.m || j.at("k").get<std::size_t>() != inst.spec.k) {
    throw std::invalid_argument("instance shape does not match its problem set");
  }
  inst.index = j.at("index").get<std::size_t>();
  inst.seed = j.at("seed").get<std::uint64_t>();
  inst.spec.max_magnitude = j.at("max_magnitude").get<int>();
  const auto& mu = j.at("mu");
  if (mu.size() != inst.m()) throw std::invalid_argument("instance has the wrong number of magnitude rows");
  for (const auto& row : mu) {
    if (row.size() != inst.k()) throw std::invalid_argument("instance magnitude row has the wrong length");
    for (const auto& x : row) {
      const int v = x.get<int>();
      if (v < 1 || v > inst.spec.max_magnitude) throw OutOfRange("instance magnitude out of range");
      inst.mu.push_back(v);
    }
  }
  inst.error_assignment = j.at("error_rows").get<std::vector<std::size_t>>();
  std::vector<bool> seen(inst.k(), false);
  if (inst.error_assignment.size() != inst.k()) throw std::invalid_argument("error assignment has the wrong length");
  for (auto r : inst.error_assignment) {
    if (r >= inst.k() || seen[r]) throw std::invalid_argument("error assignment is not a permutation");
    seen[r] = true;
  }
  inst.gamma = j.at("gamma").get<double>();
  inst.anchor_attr = j.at("anchor_attr").get<std::size_t>();
  inst.alpha = j.at("alpha").get<double>();
  inst.weights = j.at("weights").get<std::vector<double>>();
  inst.value_kind = v;
  inst.utility_kind = u;
  return inst;
}

inline std::string instance_file_name(std::size_t index) { return "inst_" + zero_pad(index + 1) + ".json"; }

inline void write_instance(const fs::path& path, const Instance& inst) {
  write_file_atomic(path, instance_to_json(inst).dump(2) + "\n");
}

inline Instance read_instance(const fs::path& path) {
  try {
    return instance_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

// ---- belief checkpoints ----

inline json belief_to_json(const BeliefState& s) {
  const auto& vs = s.utility_map().value_spec();
  const auto& us = s.utility_map().utility_spec();
  json mags = json::array();
  for (std::size_t i = 0; i < s.m(); ++i) {
    for (std::size_t j = 0; j < s.k(); ++j) {
      const Pmf& p = s.magnitude(i, j);
      json probs = json::array();
      for (double q : p.probs()) probs.push_back(fmt_g17(q));
      mags.push_back({{"keys", std::vector<int>(p.support().begin(), p.support().end())}, {"probs", probs}});
    }
  }
  return {
      {"stage", s.stage()},
      {"m", s.m()},
      {"value", to_string(vs.kind)},
      {"max_magnitudes", vs.max_magnitudes},
      {"utility", to_string(us.kind)},
      {"gamma", fmt_g17(us.gamma)},
      {"magnitudes", mags},
  };
}

inline BeliefState belief_from_json(const json& j) {
  ValueFunctionSpec vs{parse_value_kind(j.at("value").get<std::string>()),
                       j.at("max_magnitudes").get<std::vector<int>>()};
  UtilityFunctionSpec us{parse_utility_kind(j.at("utility").get<std::string>()),
                         std::stod(j.at("gamma").get<std::string>())};
  auto umap = std::make_shared<const UtilityMap>(vs, us);
  const auto m = j.at("m").get<std::size_t>();
  std::vector<Pmf> mags;
  for (const auto& e : j.at("magnitudes")) {
    std::vector<double> probs;
    for (const auto& q : e.at("probs")) probs.push_back(std::stod(q.get<std::string>()));
    mags.push_back(Pmf::from_normalized(e.at("keys").get<std::vector<int>>(), std::move(probs)));
  }
  BeliefState s(m, std::move(mags), std::move(umap));
  s.set_stage(j.at("stage").get<std::size_t>());
  return s;
}

// ---- traces ----

inline constexpr const char* kTraceHeader = "instance,replication,H,rule,stage,alt,attr,sample,selected,oc,correct,entropy,ms";

inline std::string trace_file_name(std::size_t instance, std::size_t replication) {
  return "i" + zero_pad(instance + 1) + "_r" + zero_pad(replication + 1) + ".csv";
}

/// Ids and indices are written 1-based.
inline std::string trace_to_csv(const RunTrace& tr) {
  std::string out = std::string(kTraceHeader) + "\n";
  const std::string prefix = std::to_string(tr.instance + 1) + "," + std::to_string(tr.replication + 1) + "," +
                             std::to_string(tr.policy.uniform_phase) + "," + to_string(tr.policy.rule) + ",";
  for (const auto& s : tr.stages) {
    out += prefix;
    out += std::to_string(s.stage) + "," + std::to_string(s.alt + 1) + "," + std::to_string(s.attr + 1) + "," +
           std::to_string(s.sample) + "," + std::to_string(s.selected + 1) + "," + fmt_g17(s.oc) + "," +
           (s.correct ? "1" : "0") + "," + fmt_g17(s.entropy) + "," + fmt_fixed(s.ms, 3) + "\n";
  }
  return out;
}

/// Parses a trace file. Cell, shape and true utilities are not in the CSV
/// and come from the caller (directory name and truth sidecar).
inline RunTrace trace_from_csv(const std::string& text, const CellKey& cell, std::size_t m, std::size_t k,
                               std::vector<double> true_utilities, int budget) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) throw IoError("trace file has an unexpected header");
  RunTrace tr;
  tr.cell = cell;
  tr.m = m;
  tr.k = k;
  tr.true_utilities = std::move(true_utilities);
  tr.policy.budget = budget;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 13) throw IoError("trace row has " + std::to_string(f.size()) + " fields");
    if (first) {
      tr.instance = std::stoul(f[0]) - 1;
      tr.replication = std::stoul(f[1]) - 1;
      tr.policy.uniform_phase = std::stoi(f[2]);
      tr.policy.rule = parse_rule(f[3]);
      first = false;
    }
    StageRecord s;
    s.stage = std::stoi(f[4]);
    s.alt = std::stoi(f[5]) - 1;
    s.attr = std::stoi(f[6]) - 1;
    s.sample = std::stoi(f[7]);
    s.selected = std::stoi(f[8]) - 1;
    s.oc = std::stod(f[9]);
    s.correct = f[10] == "1";
    s.entropy = std::stod(f[11]);
    s.ms = std::stod(f[12]);
    tr.stages.push_back(s);
  }
  if (tr.stages.empty()) throw IoError("trace file has no rows");
  return tr;
}

// ---- reports ----

inline constexpr const char* kSummaryHeader = "set,value,utility,H,rule,stage,runs,mean_oc,correct";

inline std::string summary_to_csv(std::span<const SummaryRow> rows) {
  std::string out = std::string(kSummaryHeader) + "\n";
  for (const auto& r : rows) {
    out += r.key.cell.set + "," + to_string(r.key.cell.value) + "," + to_string(r.key.cell.utility) + "," +
           std::to_string(r.key.uniform_phase) + "," + to_string(r.key.rule) + "," + std::to_string(r.key.stage) +
           "," + std::to_string(r.runs) + "," + fmt_g17(r.mean_oc) + "," + std::to_string(r.correct) + "\n";
  }
  return out;
}

inline constexpr const char* kComparisonHeader =
    "set,value,utility,stage,H_a,rule_a,H_b,rule_b,n_a,n_b,mean_oc_a,mean_oc_b,welch_t,welch_df,welch_p,oc_verdict,"
    "correct_a,correct_b,prop_diff,ci_lo,ci_hi,correct_verdict";

struct ComparisonRow {
  CellKey cell;
  int stage = 0;
  PolicyConfig a;
  PolicyConfig b;
  ComparisonResult result;
};

inline std::string comparisons_to_csv(std::span<const ComparisonRow> rows) {
  std::string out = std::string(kComparisonHeader) + "\n";
  for (const auto& c : rows) {
    const auto& r = c.result;
    out += c.cell.set + "," + to_string(c.cell.value) + "," + to_string(c.cell.utility) + "," +
           std::to_string(c.stage) + "," + std::to_string(c.a.uniform_phase) + "," + to_string(c.a.rule) + "," +
           std::to_string(c.b.uniform_phase) + "," + to_string(c.b.rule) + "," + std::to_string(r.n_a) + "," +
           std::to_string(r.n_b) + "," + fmt_g17(r.mean_oc_a) + "," + fmt_g17(r.mean_oc_b) + "," +
           fmt_g17(r.welch.t) + "," + fmt_g17(r.welch.df) + "," + fmt_g17(r.welch.p) + "," +
           to_string(r.oc_verdict) + "," + std::to_string(r.correct_a) + "," + std::to_string(r.correct_b) + "," +
           fmt_g17(r.ci.diff) + "," + fmt_g17(r.ci.lo) + "," + fmt_g17(r.ci.hi) + "," +
           to_string(r.correct_verdict) + "\n";
  }
  return out;
}

}  // namespace sampalloc
