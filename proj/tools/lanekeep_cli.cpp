#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "lanekeep/errors.hpp"
#include "lanekeep/experiment.hpp"

namespace {

struct Globals {
  int scenario{1};
  std::uint64_t seed{1};
  std::string config;
  std::string out;
  std::string scenario_file;
  std::string dump_dir;
  int dump_every{20};
};

void add_globals(CLI::App* app, Globals& g) {
  app->add_option("--scenario", g.scenario, "Built-in scenario 1, 2 or 3")->check(CLI::Range(1, 3));
  app->add_option("--scenario-file", g.scenario_file, "Scenario JSON overriding --scenario");
  app->add_option("--seed", g.seed, "Root seed");
  app->add_option("--config", g.config, "Config JSON (missing keys keep defaults)");
  app->add_option("--out", g.out, "Output directory");
  app->add_option("--dump-events", g.dump_dir, "Write evaluation events and render snapshots here");
  app->add_option("--dump-every", g.dump_every, "World steps between render snapshots");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lane-keeping controllers on an event-camera robot simulation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  Globals g;
  lanekeep::RunRequest req;
  long steps = 0;
  std::string weights;
  std::vector<std::string> runs;

  auto* train_dqn = app.add_subcommand("train-dqn", "Train the deep Q-network and archive its states");
  train_dqn->add_option("--total-steps", steps, "World-step budget");

  auto* transfer = app.add_subcommand("transfer", "Distill a DQN into a spiking network");
  transfer->add_option("--archive", req.archive, "State archive from train-dqn")->required();
  transfer->add_option("--dqn-checkpoint", req.checkpoint, "Q-network checkpoint")->required();

  auto* run_snn = app.add_subcommand("run-snn", "Evaluate a transferred spiking controller");
  run_snn->add_option("--checkpoint", req.checkpoint, "Normalized network checkpoint")->required();

  auto* train_rstdp = app.add_subcommand("train-rstdp", "Train the R-STDP controller");
  train_rstdp->add_option("--steps", steps, "Control-step budget");

  auto* braitenberg = app.add_subcommand("run-braitenberg", "Evaluate the hand-crafted controller");
  braitenberg->add_option("--weights", weights, "Weight grid JSON (default: linear ramp)");

  auto* evaluate = app.add_subcommand("evaluate-lap", "Evaluate one outer-lane lap of a saved controller");
  evaluate->add_option("--controller", req.controller, "rstdp | braitenberg | dqn | dqn-snn")
      ->required()
      ->check(CLI::IsMember({"rstdp", "braitenberg", "dqn", "dqn-snn"}));
  evaluate->add_option("--checkpoint", req.checkpoint, "Controller checkpoint");

  auto* compare = app.add_subcommand("compare", "Train and evaluate all four controllers");
  compare->add_option("--steps", steps, "Training budget override for both learners");

  auto* report = app.add_subcommand("report", "Tabulate training times and errors of finished runs");
  report->add_option("runs", runs, "Run directories")->required();

  for (auto* sub : app.get_subcommands([](const CLI::App*) { return true; })) add_globals(sub, g);

  CLI11_PARSE(app, argc, argv);

  try {
    auto* sub = app.get_subcommands().front();
    req.verb = sub->get_name();
    req.scenario = g.scenario;
    req.seed = g.seed;
    req.scenario_file = g.scenario_file;
    req.dump_dir = g.dump_dir;
    req.dump_every = g.dump_every;
    req.out = g.out.empty() ? std::filesystem::path("runs") / req.verb : std::filesystem::path(g.out);
    if (!g.config.empty()) req.config = lanekeep::load_config(g.config);
    if (steps > 0) req.steps = steps;
    if (!weights.empty()) req.config.braitenberg.weights_file = weights;
    for (const auto& r : runs) req.runs.emplace_back(r);

    const auto m = lanekeep::run_experiment(req);
    std::cout << m.to_json().dump(2) << '\n';
  } catch (const lanekeep::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
