#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lamg/pipeline.hpp"

using lamg::Experiment;
using lamg::ExperimentConfig;
using lamg::RunOverrides;

namespace {

ExperimentConfig load_config(const std::string& path, std::uint64_t seed, bool seed_set) {
  ExperimentConfig cfg = ExperimentConfig::load(path);
  if (seed_set) {
    cfg.seed = seed;
    cfg.validate();
  }
  return cfg;
}

std::vector<int> pick_problems(Experiment& exp, const std::vector<int>& requested) {
  return requested.empty() ? exp.holdout_problems() : requested;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"learned adaptive mesh generation pipeline"};
  app.require_subcommand(1);
  // set before add_subcommand so subcommands inherit it; lets --config and
  // --seed appear after the subcommand name
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  app.add_option("--config", config_path, "experiment config (json)")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "override the config seed")->each([&](const std::string&) {
    seed_set = true;
  });

  auto* gen = app.add_subcommand("gen", "generate the problem corpus and its supervision");

  auto* train = app.add_subcommand("train", "train the sizing network on the corpus");

  auto* run = app.add_subcommand("run", "learned pipeline on holdout (or given) problems");
  std::vector<int> run_problems;
  RunOverrides ov;
  run->add_option("--problem", run_problems, "problem index (repeatable; default holdout)");
  run->add_option("--n", ov.n, "sample points (0 keeps the config value)");
  run->add_option("--m", ov.m, "walks per point (0 keeps the config value)");
  run->add_option("--eta", ov.eta, "sizing scale (0 keeps the config value)");
  run->add_option("--tag", ov.tag, "variant label appended to run files");

  auto* baseline = app.add_subcommand("baseline", "reference methods on the same problems");
  std::string method;
  std::vector<int> baseline_problems;
  baseline->add_option("--method", method, "amr | wos | uniform | amg")->required();
  baseline->add_option("--problem", baseline_problems,
                       "problem index (repeatable; default holdout)");

  auto* report = app.add_subcommand("report", "aggregate run records into tables and plots");

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg = load_config(config_path, seed, seed_set);
    Experiment exp(cfg, &std::cerr);
    if (gen->parsed()) {
      exp.gen_dataset();
    } else if (train->parsed()) {
      exp.train_model();
    } else if (run->parsed()) {
      for (int p : pick_problems(exp, run_problems)) exp.run_lamg(p, ov);
    } else if (baseline->parsed()) {
      for (int p : pick_problems(exp, baseline_problems)) exp.run_baseline(method, p);
    } else if (report->parsed()) {
      exp.evaluate();
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
