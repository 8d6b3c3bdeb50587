#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "io.hpp"
#include "sim.hpp"

namespace sampalloc {

class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Everything that defines an experiment. Defaults reproduce the full design:
/// 20 instances, 10 replications, T = 180, H in {0, 36, ..., 180}, both rules.
struct ExperimentConfig {
  std::vector<std::string> sets{"A", "B"};
  std::vector<ValueKind> value_kinds{ValueKind::Additive, ValueKind::Compensating};
  std::vector<UtilityKind> utility_kinds{UtilityKind::RiskNeutral, UtilityKind::Exponential};
  std::size_t instances = 20;
  std::size_t replications = 10;
  int budget = 180;
  std::vector<int> uniform_phases{0, 36, 72, 108, 144, 180};
  std::vector<Rule> rules{Rule::I, Rule::II};
  std::optional<std::uint64_t> seed;
  fs::path out = "out";
  std::size_t workers = 1;
  std::size_t limit = 0;  // max new runs per invocation, 0 = no limit

  void apply_smoke() {
    instances = 2;
    replications = 2;
  }

  std::vector<PolicyConfig> policies() const {
    std::vector<PolicyConfig> out_p;
    for (int h : uniform_phases) {
      for (Rule r : rules) out_p.push_back({budget, h, r});
    }
    return out_p;
  }

  std::vector<CellKey> cells() const {
    std::vector<CellKey> out_c;
    for (const auto& s : sets) {
      for (auto v : value_kinds) {
        for (auto u : utility_kinds) out_c.push_back({s, v, u});
      }
    }
    return out_c;
  }

  void validate() const {
    if (sets.empty() || value_kinds.empty() || utility_kinds.empty() || uniform_phases.empty() || rules.empty()) {
      throw ConfigError("config lists must be non-empty");
    }
    if (workers < 1) throw ConfigError("workers must be at least 1");
    for (const auto& s : sets) {
      const auto spec = problem_set(s);  // throws UnknownSet
      for (const auto& p : policies()) p.validate(spec.m, spec.k);
    }
  }
};

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  const std::set<std::string> known{"sets", "value_kinds", "utility_kinds", "instances", "replications", "budget",
                                    "uniform_phases", "rules", "seed", "out", "workers"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  if (j.contains("sets")) c.sets = j["sets"].get<std::vector<std::string>>();
  if (j.contains("value_kinds")) {
    c.value_kinds.clear();
    for (const auto& s : j["value_kinds"]) c.value_kinds.push_back(parse_value_kind(s.get<std::string>()));
  }
  if (j.contains("utility_kinds")) {
    c.utility_kinds.clear();
    for (const auto& s : j["utility_kinds"]) c.utility_kinds.push_back(parse_utility_kind(s.get<std::string>()));
  }
  if (j.contains("instances")) c.instances = j["instances"].get<std::size_t>();
  if (j.contains("replications")) c.replications = j["replications"].get<std::size_t>();
  if (j.contains("budget")) c.budget = j["budget"].get<int>();
  if (j.contains("uniform_phases")) c.uniform_phases = j["uniform_phases"].get<std::vector<int>>();
  if (j.contains("rules")) {
    c.rules.clear();
    for (const auto& s : j["rules"]) c.rules.push_back(parse_rule(s.get<std::string>()));
  }
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("out")) c.out = j["out"].get<std::string>();
  if (j.contains("workers")) c.workers = j["workers"].get<std::size_t>();
  return c;
}

inline ExperimentConfig load_config(const fs::path& path) {
  try {
    return config_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline std::ostream* g_log = &std::cerr;

// ---- generate ----

inline fs::path instance_dir(const fs::path& out, const std::string& set) { return out / "instances" / set; }

inline std::uint64_t instance_seed(std::uint64_t root, const std::string& set, std::size_t index) {
  return derive_seed(root, {0x1e57ULL, set_tag(set), index});
}

/// Writes out/instances/<set>/inst_NN.json plus manifest.csv (file,index,seed).
inline void cmd_generate(const ExperimentConfig& cfg) {
  const std::uint64_t root = cfg.seed.value_or(0);
  for (const auto& set : cfg.sets) {
    const auto spec = problem_set(set);
    const fs::path dir = instance_dir(cfg.out, set);
    fs::create_directories(dir);
    std::string manifest = "file,index,seed\n";
    for (std::size_t n = 0; n < cfg.instances; ++n) {
      const auto seed = instance_seed(root, set, n);
      const Instance inst = generate_instance(spec, ValueKind::Additive, UtilityKind::RiskNeutral, seed, n);
      write_instance(dir / instance_file_name(n), inst);
      manifest += instance_file_name(n) + "," + std::to_string(n) + "," + std::to_string(seed) + "\n";
    }
    write_file_atomic(dir / "manifest.csv", manifest);
    *g_log << "generated " << cfg.instances << " instance(s) for set " << set << " in " << dir.string() << "\n";
  }
}

inline std::vector<Instance> load_instances(const fs::path& out, const std::string& set, std::size_t count) {
  const fs::path dir = instance_dir(out, set);
  if (!fs::exists(dir / "manifest.csv")) {
    throw IoError("no instances for set " + set + " under " + dir.string() + " (run 'generate' first)");
  }
  std::istringstream in(read_file(dir / "manifest.csv"));
  std::string line;
  std::getline(in, line);
  std::vector<Instance> out_i;
  while (out_i.size() < count && std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    Instance inst = read_instance(dir / f.at(0));
    if (inst.spec.name != set) throw ConfigError(f.at(0) + " belongs to set " + inst.spec.name);
    out_i.push_back(std::move(inst));
  }
  if (out_i.size() < count) {
    throw ConfigError("config asks for " + std::to_string(count) + " instances of set " + set + " but only " +
                      std::to_string(out_i.size()) + " exist");
  }
  return out_i;
}

// ---- run ----

inline fs::path trace_root(const fs::path& out) { return out / "traces"; }

inline std::string truth_to_csv(std::span<const Instance> instances) {
  std::string s = "instance,alt,utility,best\n";
  for (const auto& inst : instances) {
    const auto truth = true_utilities(inst.mu, *inst.utility_map());
    for (std::size_t i = 0; i < inst.m(); ++i) {
      s += std::to_string(inst.index + 1) + "," + std::to_string(i + 1) + "," + fmt_g17(truth.xi[i]) + "," +
           (truth.is_best(i) ? "1" : "0") + "\n";
    }
  }
  return s;
}

/// Settings a resumed run must share with the runs already on disk.
inline json run_identity(const ExperimentConfig& cfg) {
  return {{"seed", *cfg.seed}, {"budget", cfg.budget}};
}

struct RunSummary {
  std::size_t planned = 0;
  std::size_t skipped = 0;
  std::size_t executed = 0;
};

/// Runs every (cell, instance, policy, replication) not yet recorded in
/// out/runs.manifest; each trace lands in traces/<cell>/<policy>/iNN_rNN.csv.
inline RunSummary cmd_run(const ExperimentConfig& cfg) {
  if (!cfg.seed) throw ConfigError("run requires --seed");
  cfg.validate();
  fs::create_directories(cfg.out);

  const fs::path id_path = cfg.out / "run.json";
  if (fs::exists(id_path)) {
    const json prev = json::parse(read_file(id_path));
    if (prev != run_identity(cfg)) {
      throw ConfigError("config mismatch with existing runs in " + cfg.out.string() + " (was " + prev.dump() +
                        ", now " + run_identity(cfg).dump() + ")");
    }
  } else {
    write_file_atomic(id_path, run_identity(cfg).dump() + "\n");
  }

  const fs::path manifest_path = cfg.out / "runs.manifest";
  std::set<std::string> done;
  if (fs::exists(manifest_path)) {
    std::istringstream in(read_file(manifest_path));
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && fs::exists(cfg.out / line)) done.insert(line);
    }
  }

  std::map<std::string, std::vector<Instance>> base;
  for (const auto& set : cfg.sets) base[set] = load_instances(cfg.out, set, cfg.instances);

  // Cell-specific instance copies must outlive the jobs that point at them.
  std::vector<std::vector<Instance>> cell_instances;
  std::vector<std::pair<RunJob, std::string>> todo;
  RunSummary summary;
  const auto policies = cfg.policies();
  for (const auto& cell : cfg.cells()) {
    auto& insts = cell_instances.emplace_back();
    for (const auto& b : base[cell.set]) insts.push_back(b.with_preferences(cell.value, cell.utility));
    const fs::path cell_dir = trace_root(cfg.out) / cell_label(cell);
    write_file_atomic(cell_dir / "truth.csv", truth_to_csv(insts));
    for (const auto& job : make_jobs(insts, policies, cfg.replications)) {
      const std::string rel = (fs::path("traces") / cell_label(cell) / policy_label(job.policy) /
                               trace_file_name(job.instance->index, job.replication))
                                  .generic_string();
      ++summary.planned;
      if (done.count(rel)) {
        ++summary.skipped;
        continue;
      }
      todo.emplace_back(job, rel);
    }
  }
  if (cfg.limit > 0 && todo.size() > cfg.limit) todo.resize(cfg.limit);

  std::mutex mu;
  std::ofstream manifest(manifest_path, std::ios::app);
  if (!manifest) throw IoError("cannot append to " + manifest_path.string());
  std::size_t finished = 0;
  parallel_for(todo.size(), cfg.workers, [&](std::size_t n) {
    const auto& [job, rel] = todo[n];
    const RunTrace tr = run_one(*job.instance, job.policy, job.replication, *cfg.seed);
    write_file_atomic(cfg.out / rel, trace_to_csv(tr));
    std::lock_guard lock(mu);
    manifest << rel << "\n" << std::flush;
    done.insert(rel);
    ++finished;
    if (finished % 100 == 0 || finished == todo.size()) {
      *g_log << "run " << finished << "/" << todo.size() << "\n" << std::flush;
    }
  });
  manifest.close();
  summary.executed = todo.size();

  // Rewrite sorted so the manifest does not depend on completion order.
  std::string sorted;
  for (const auto& rel : done) sorted += rel + "\n";
  write_file_atomic(manifest_path, sorted);
  *g_log << "runs: " << summary.planned << " planned, " << summary.skipped << " already done, " << summary.executed
         << " executed\n";
  return summary;
}

// ---- report ----

inline std::vector<RunTrace> load_traces(const fs::path& out) {
  const fs::path root = trace_root(out);
  std::vector<RunTrace> traces;
  if (!fs::is_directory(root)) throw IoError("no traces under " + root.string());
  std::vector<fs::path> cell_dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) cell_dirs.push_back(e.path());
  }
  std::sort(cell_dirs.begin(), cell_dirs.end());
  for (const auto& cdir : cell_dirs) {
    const CellKey cell = parse_cell_label(cdir.filename().string());
    const auto spec = problem_set(cell.set);
    std::map<std::size_t, std::vector<double>> truth;
    {
      std::istringstream in(read_file(cdir / "truth.csv"));
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split(line);
        truth[std::stoul(f.at(0)) - 1].push_back(std::stod(f.at(2)));
      }
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(cdir)) {
      if (e.is_regular_file() && e.path().extension() == ".csv" && e.path().filename() != "truth.csv") {
        files.push_back(e.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const std::string text = read_file(f);
      // Instance id is the first field of the first data row.
      const auto nl = text.find('\n');
      const auto inst_id = std::stoul(text.substr(nl + 1, text.find(',', nl) - nl - 1)) - 1;
      auto it = truth.find(inst_id);
      if (it == truth.end()) throw IoError(f.string() + ": instance missing from truth.csv");
      RunTrace tr = trace_from_csv(text, cell, spec.m, spec.k, it->second, 0);
      tr.policy.budget = tr.stages.back().stage;
      traces.push_back(std::move(tr));
    }
  }
  if (traces.empty()) throw IoError("no trace files under " + root.string());
  return traces;
}

inline std::string short_cell(const CellKey& c) { return to_string(c.utility) + "_" + to_string(c.value); }

/// Writes the report tree under out/report and returns the comparison rows.
inline std::vector<ComparisonRow> cmd_report(const ExperimentConfig& cfg) {
  auto groups = group_by_policy(load_traces(cfg.out));
  const fs::path rep = cfg.out / "report";
  fs::create_directories(rep / "curves");

  std::vector<RunTrace> all;
  for (const auto& [_, g] : groups) all.insert(all.end(), g.begin(), g.end());
  const auto summary = aggregate(all);
  write_file_atomic(rep / "summary.csv", summary_to_csv(summary));
  all.clear();
  all.shrink_to_fit();

  // Per-cell stage curves: one column pair per policy.
  std::map<CellKey, std::vector<const SummaryRow*>> by_cell;
  for (const auto& r : summary) by_cell[r.key.cell].push_back(&r);
  for (const auto& [cell, rows] : by_cell) {
    std::vector<std::pair<int, Rule>> pols;
    std::map<int, std::map<std::pair<int, Rule>, const SummaryRow*>> grid;
    for (const auto* r : rows) {
      const std::pair<int, Rule> p{r->key.uniform_phase, r->key.rule};
      if (std::find(pols.begin(), pols.end(), p) == pols.end()) pols.push_back(p);
      grid[r->key.stage][p] = r;
    }
    std::sort(pols.begin(), pols.end());
    std::string s = "stage";
    for (const auto& [h, rule] : pols) {
      const std::string lab = policy_label({0, h, rule});
      s += ",mean_oc_" + lab + ",correct_" + lab;
    }
    s += "\n";
    for (const auto& [stage, cols] : grid) {
      s += std::to_string(stage);
      for (const auto& p : pols) {
        auto it = cols.find(p);
        s += it == cols.end() ? ",," : "," + fmt_g17(it->second->mean_oc) + "," + std::to_string(it->second->correct);
      }
      s += "\n";
    }
    write_file_atomic(rep / "curves" / (cell_label(cell) + ".csv"), s);
  }

  // Final-stage comparisons of every policy against the uniform baseline
  // (H = T) of the same rule and cell.
  std::vector<ComparisonRow> comparisons;
  std::map<PolicyKey, ComparisonResult> vs_baseline;
  for (const auto& [key, runs] : groups) {
    const auto& [cell, h, rule] = key;
    const int budget = runs.front().policy.budget;
    if (h == budget) continue;
    auto base = groups.find({cell, budget, rule});
    if (base == groups.end()) continue;
    const Outcomes a = outcomes_at(runs, budget), b = outcomes_at(base->second, budget);
    if (a.size() < 2 || b.size() < 2) continue;
    ComparisonRow row{cell, budget, runs.front().policy, base->second.front().policy, compare(a, b)};
    vs_baseline[key] = row.result;
    comparisons.push_back(row);
  }
  if (!comparisons.empty()) write_file_atomic(rep / "comparisons.csv", comparisons_to_csv(comparisons));

  // Tables: rows H, columns (utility, value) x rule, per set.
  std::set<std::string> sets;
  for (const auto& [key, _] : groups) sets.insert(std::get<0>(key).set);
  for (const auto& set : sets) {
    std::vector<std::pair<CellKey, Rule>> cols;
    std::set<int> hs;
    for (const auto& [key, _] : groups) {
      const auto& [cell, h, rule] = key;
      if (cell.set != set) continue;
      hs.insert(h);
      if (std::find(cols.begin(), cols.end(), std::pair{cell, rule}) == cols.end()) cols.push_back({cell, rule});
    }
    std::sort(cols.begin(), cols.end(), [](const auto& x, const auto& y) {
      return std::tuple{x.first.utility, x.first.value, x.second} < std::tuple{y.first.utility, y.first.value, y.second};
    });
    std::string head = "H";
    for (const auto& [cell, rule] : cols) head += "," + short_cell(cell) + "_" + to_string(rule);
    head += "\n";
    std::string oc = head, correct = head, time = head;
    for (int h : hs) {
      oc += std::to_string(h);
      correct += std::to_string(h);
      time += std::to_string(h);
      for (const auto& [cell, rule] : cols) {
        auto g = groups.find({cell, h, rule});
        if (g == groups.end()) {
          oc += ",";
          correct += ",";
          time += ",";
          continue;
        }
        const int budget = g->second.front().policy.budget;
        const Outcomes o = outcomes_at(g->second, budget);
        std::string oc_mark, cs_mark;
        if (auto c = vs_baseline.find(g->first); c != vs_baseline.end()) {
          oc_mark = c->second.oc_verdict == Verdict::Better ? "†" : c->second.oc_verdict == Verdict::Worse ? "*" : "";
          cs_mark = c->second.correct_verdict == Verdict::Better ? "†"
                    : c->second.correct_verdict == Verdict::Worse ? "*"
                                                                   : "";
        }
        oc += "," + fmt_fixed(mean(o.oc), 4) + oc_mark;
        correct += "," + std::to_string(o.correct_count()) + cs_mark;
        time += "," + fmt_fixed(mean_run_ms(g->second), 1);
      }
      oc += "\n";
      correct += "\n";
      time += "\n";
    }
    write_file_atomic(rep / ("table_oc_" + set + ".csv"), oc);
    write_file_atomic(rep / ("table_correct_" + set + ".csv"), correct);
    write_file_atomic(rep / ("table_time_" + set + ".csv"), time);
  }

  // Sampling behaviour per policy: distinct pairs and shares by rank/attribute.
  std::string samp = "set,value,utility,H,rule,runs,mean_distinct_pairs,share_kind,index,share\n";
  for (const auto& [key, runs] : groups) {
    const auto& [cell, h, rule] = key;
    const auto sb = sampling_behavior(runs);
    const std::string pre = cell.set + "," + to_string(cell.value) + "," + to_string(cell.utility) + "," +
                            std::to_string(h) + "," + to_string(rule) + "," + std::to_string(sb.runs) + "," +
                            fmt_g17(sb.mean_distinct_pairs) + ",";
    for (std::size_t r = 0; r < sb.rank_share.size(); ++r) {
      samp += pre + "rank," + std::to_string(r + 1) + "," + fmt_g17(sb.rank_share[r]) + "\n";
    }
    for (std::size_t j = 0; j < sb.attr_share.size(); ++j) {
      samp += pre + "attr," + std::to_string(j + 1) + "," + fmt_g17(sb.attr_share[j]) + "\n";
    }
  }
  write_file_atomic(rep / "sampling.csv", samp);
  *g_log << "report written to " << rep.string() << " (" << groups.size() << " policy groups)\n";
  return comparisons;
}

}  // namespace sampalloc
