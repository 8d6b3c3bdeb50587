// sampalloc: generate instances, run allocation experiments, build reports.

#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "sampalloc/cli.hpp"

namespace {

struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  std::string out;
  std::string set;
  bool smoke = false;
  std::size_t limit = 0;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "output directory (default: out)");
  cmd->add_option("--set", f.set, "restrict to one problem set")->check(CLI::IsMember({"A", "B"}));
  cmd->add_flag("--smoke", f.smoke, "reduced scale: 2 instances x 2 replications");
  cmd->add_option("--workers", f.workers, "parallel runs")->check(CLI::PositiveNumber);
}

sampalloc::ExperimentConfig resolve(const CLI::App* cmd, const Flags& f) {
  sampalloc::ExperimentConfig cfg;
  if (!f.config.empty()) cfg = sampalloc::load_config(f.config);
  if (cmd->get_option_no_throw("--seed") && cmd->count("--seed")) cfg.seed = f.seed;
  if (cmd->count("--workers")) cfg.workers = f.workers;
  if (!f.out.empty()) cfg.out = f.out;
  if (!f.set.empty()) cfg.sets = {f.set};
  if (f.smoke) cfg.apply_smoke();
  cfg.limit = f.limit;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete Bayesian sample allocation experiments"};
  app.require_subcommand(1);
  Flags f;

  auto* gen = app.add_subcommand("generate", "write problem instances and a seed manifest");
  add_common(gen, f);
  gen->add_option("--seed", f.seed, "root seed for instance generation (default 0)");

  auto* run = app.add_subcommand("run", "run every policy on every instance; resumes from runs.manifest");
  add_common(run, f);
  run->add_option("--seed", f.seed, "root seed for sampling streams")->required();
  run->add_option("--limit", f.limit, "stop after this many new runs");

  auto* rep = app.add_subcommand("report", "summaries, tables, curves and comparisons from traces");
  add_common(rep, f);
  rep->add_option("--seed", f.seed, "accepted for symmetry; reports do not use it");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*gen) {
      sampalloc::cmd_generate(resolve(gen, f));
    } else if (*run) {
      sampalloc::cmd_run(resolve(run, f));
    } else if (*rep) {
      sampalloc::cmd_report(resolve(rep, f));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
