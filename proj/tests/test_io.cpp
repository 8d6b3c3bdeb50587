#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "sampalloc/cli.hpp"

using namespace sampalloc;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("sampalloc_" + tag + "_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct QuietLog {
  std::ostringstream sink;
  std::ostream* prev = g_log;
  QuietLog() { g_log = &sink; }
  ~QuietLog() { g_log = prev; }
};

ExperimentConfig small_config(const fs::path& out) {
  ExperimentConfig c;
  c.sets = {"A"};
  c.value_kinds = {ValueKind::Compensating};
  c.utility_kinds = {UtilityKind::Exponential};
  c.instances = 2;
  c.replications = 2;
  c.budget = 72;
  c.uniform_phases = {0, 36, 72};
  c.seed = 99;
  c.out = out;
  return c;
}

// Every trace file's contents without the timing column.
std::map<std::string, std::string> traces_without_ms(const fs::path& out) {
  std::map<std::string, std::string> m;
  for (const auto& e : fs::recursive_directory_iterator(out / "traces")) {
    if (!e.is_regular_file()) continue;
    std::istringstream in(read_file(e.path()));
    std::string line, kept;
    while (std::getline(in, line)) kept += line.substr(0, line.rfind(',')) + "\n";
    m[fs::relative(e.path(), out).generic_string()] = kept;
  }
  return m;
}

}  // namespace

TEST(InstanceJson, RoundTrip) {
  const auto inst = generate_instance(problem_set("B"), ValueKind::Additive, UtilityKind::RiskNeutral, 31, 4);
  const auto back = instance_from_json(json::parse(instance_to_json(inst).dump()));
  EXPECT_EQ(back.mu, inst.mu);
  EXPECT_EQ(back.error_assignment, inst.error_assignment);
  EXPECT_EQ(back.gamma, inst.gamma);
  EXPECT_EQ(back.alpha, inst.alpha);
  EXPECT_EQ(back.weights, inst.weights);
  EXPECT_EQ(back.seed, inst.seed);
  EXPECT_EQ(back.index, 4u);
  EXPECT_EQ(back.spec.name, "B");
}

TEST(InstanceJson, RejectsBadFiles) {
  auto j = instance_to_json(generate_instance(problem_set("A"), ValueKind::Additive, UtilityKind::RiskNeutral, 1));
  auto bad = j;
  bad["mu"][0][0] = 16;
  EXPECT_THROW(instance_from_json(bad), OutOfRange);
  bad = j;
  bad["error_rows"] = {0, 0, 1};
  EXPECT_THROW(instance_from_json(bad), std::invalid_argument);
  bad = j;
  bad["set"] = "Z";
  EXPECT_THROW(instance_from_json(bad), UnknownSet);
}

TEST(BeliefJson, RoundTripIsExact) {
  const auto inst = generate_instance(problem_set("A"), ValueKind::Compensating, UtilityKind::Exponential, 17);
  BeliefState s = BeliefState::uniform(inst.m(), inst.utility_map());
  Rng rng(4);
  for (std::size_t t = 0; t < 40; ++t) {
    const std::size_t i = t % inst.m(), j = t % inst.k();
    s.apply_sample(i, j, draw_sample(inst, i, j, rng), inst.error_model(j));
  }
  const auto back = belief_from_json(json::parse(belief_to_json(s).dump()));
  EXPECT_EQ(back.stage(), s.stage());
  for (std::size_t i = 0; i < s.m(); ++i) {
    for (std::size_t j = 0; j < s.k(); ++j) EXPECT_EQ(back.magnitude(i, j), s.magnitude(i, j));
    EXPECT_EQ(back.utility_dist(i), s.utility_dist(i));
  }
  EXPECT_EQ(back.expected_utilities(), s.expected_utilities());
}

TEST(TraceCsv, HeaderAndRoundTrip) {
  const auto inst = generate_instance(problem_set("A"), ValueKind::Additive, UtilityKind::RiskNeutral, 2, 3);
  const auto tr = run_one(inst, {72, 36, Rule::II}, 1, 8);
  const std::string csv = trace_to_csv(tr);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "instance,replication,H,rule,stage,alt,attr,sample,selected,oc,correct,entropy,ms");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 73);
  EXPECT_EQ(csv.find('\r'), std::string::npos);
  const auto back = trace_from_csv(csv, tr.cell, tr.m, tr.k, tr.true_utilities, 72);
  EXPECT_EQ(back.instance, 3u);
  EXPECT_EQ(back.replication, 1u);
  EXPECT_EQ(back.policy, tr.policy);
  ASSERT_EQ(back.stages.size(), tr.stages.size());
  for (std::size_t t = 0; t < tr.stages.size(); ++t) {
    const auto &a = tr.stages[t], &b = back.stages[t];
    EXPECT_EQ(a.alt, b.alt);
    EXPECT_EQ(a.attr, b.attr);
    EXPECT_EQ(a.sample, b.sample);
    EXPECT_EQ(a.selected, b.selected);
    EXPECT_EQ(a.oc, b.oc);
    EXPECT_EQ(a.entropy, b.entropy);
    EXPECT_EQ(a.correct, b.correct);
  }
  EXPECT_THROW(trace_from_csv("bad,header\n", tr.cell, 12, 3, {}, 72), IoError);
}

TEST(Config, JsonAndValidation) {
  const auto c = config_from_json(json::parse(R"({"sets":["B"],"uniform_phases":[0,36],"rules":["II"],"seed":5,"workers":2})"));
  EXPECT_EQ(c.sets, std::vector<std::string>{"B"});
  EXPECT_EQ(c.policies().size(), 2u);
  EXPECT_EQ(*c.seed, 5u);
  EXPECT_EQ(c.cells().size(), 4u);
  EXPECT_NO_THROW(c.validate());
  EXPECT_THROW(config_from_json(json::parse(R"({"bogus":1})")), ConfigError);
  auto bad = c;
  bad.uniform_phases = {30};
  EXPECT_THROW(bad.validate(), NotMultiple);
  bad = c;
  bad.sets = {"Q"};
  EXPECT_THROW(bad.validate(), UnknownSet);
}

TEST(CmdGenerate, FilesManifestAndDeterminism) {
  QuietLog quiet;
  TempDir a("gen_a"), b("gen_b");
  auto cfg = small_config(a.path);
  cfg.instances = 20;
  cmd_generate(cfg);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a.path / "instances" / "A")) files += e.path().extension() == ".json";
  EXPECT_EQ(files, 20u);
  cfg.out = b.path;
  cmd_generate(cfg);
  for (const auto* f : {"inst_01.json", "inst_20.json", "manifest.csv"}) {
    EXPECT_EQ(read_file(a.path / "instances/A" / f), read_file(b.path / "instances/A" / f)) << f;
  }
  cfg.instances = 0;
  cfg.out = a.path / "empty";
  cmd_generate(cfg);
  EXPECT_EQ(read_file(cfg.out / "instances/A/manifest.csv"), "file,index,seed\n");
}

TEST(CmdRun, RequiresSeedAndInstances) {
  QuietLog quiet;
  TempDir d("run_pre");
  auto cfg = small_config(d.path);
  cfg.seed.reset();
  EXPECT_THROW(cmd_run(cfg), ConfigError);
  cfg.seed = 1;
  EXPECT_THROW(cmd_run(cfg), IoError);
}

TEST(CmdRun, ResumeMatchesUninterrupted) {
  QuietLog quiet;
  TempDir a("run_a"), b("run_b");
  auto cfg = small_config(a.path);
  cmd_generate(cfg);
  const auto full = cmd_run(cfg);
  EXPECT_EQ(full.planned, 2u * 3 * 2 * 2);
  EXPECT_EQ(full.executed, full.planned);

  cfg.out = b.path;
  cmd_generate(cfg);
  cfg.limit = 5;
  EXPECT_EQ(cmd_run(cfg).executed, 5u);
  cfg.limit = 0;
  cfg.workers = 2;
  const auto rest = cmd_run(cfg);
  EXPECT_EQ(rest.skipped, 5u);
  EXPECT_EQ(rest.executed, full.planned - 5);

  EXPECT_EQ(traces_without_ms(a.path), traces_without_ms(b.path));
  EXPECT_EQ(read_file(a.path / "runs.manifest"), read_file(b.path / "runs.manifest"));
  EXPECT_EQ(cmd_run(cfg).executed, 0u);

  auto other = cfg;
  other.seed = 100;
  EXPECT_THROW(cmd_run(other), ConfigError);

  // Single run smoke: 72 stage rows.
  std::istringstream in(read_file(b.path / "traces/A_B_averse/H036_II/i01_r01.csv"));
  std::string line;
  int rows = -1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 72);
}

TEST(CmdReport, OutputsAndErrors) {
  QuietLog quiet;
  TempDir d("report");
  auto cfg = small_config(d.path);
  EXPECT_THROW(cmd_report(cfg), IoError);  // nothing to read

  cmd_generate(cfg);
  cmd_run(cfg);
  const auto comps = cmd_report(cfg);
  EXPECT_EQ(comps.size(), 4u);  // H=0 and H=36, each rule, against H=72
  const fs::path rep = d.path / "report";
  for (const auto* f : {"summary.csv", "comparisons.csv", "sampling.csv", "table_oc_A.csv", "table_correct_A.csv",
                        "table_time_A.csv", "curves/A_B_averse.csv"}) {
    EXPECT_TRUE(fs::exists(rep / f)) << f;
  }
  const std::string summary = read_file(rep / "summary.csv");
  EXPECT_EQ(summary.substr(0, summary.find('\n')), kSummaryHeader);
  EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 1 + 6 * 72);
  const std::string table = read_file(rep / "table_oc_A.csv");
  EXPECT_EQ(table.substr(0, table.find('\n')), "H,averse_B_I,averse_B_II");

  // Report of only one policy: summary without comparisons.
  TempDir one("report_one");
  auto c1 = small_config(one.path);
  c1.uniform_phases = {36};
  c1.rules = {Rule::I};
  cmd_generate(c1);
  cmd_run(c1);
  EXPECT_TRUE(cmd_report(c1).empty());
  EXPECT_TRUE(fs::exists(one.path / "report/summary.csv"));
  EXPECT_FALSE(fs::exists(one.path / "report/comparisons.csv"));

  // Report output does not depend on the run's worker count.
  TempDir again("report_again");
  auto c2 = small_config(again.path);
  c2.workers = 3;
  cmd_generate(c2);
  cmd_run(c2);
  cmd_report(c2);
  for (const auto* f : {"summary.csv", "comparisons.csv", "sampling.csv", "table_correct_A.csv"}) {
    EXPECT_EQ(read_file(rep / f), read_file(again.path / "report" / f)) << f;
  }
}
