#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lanekeep/config.hpp"
#include "lanekeep/errors.hpp"
#include "lanekeep/experiment.hpp"
#include "lanekeep/scenario_io.hpp"
#include "lanekeep/training_log.hpp"

using namespace lanekeep;
namespace fs = std::filesystem;

namespace {

double wrap(double a) { return std::remainder(a, 2.0 * kPi); }

double curvature_at(const LanePath& path, double s) {
  for (const auto& p : path.pieces()) {
    if (s < p.s_start + p.length) return p.curvature;
  }
  return path.pieces().back().curvature;
}

// Feed-forward curvature plus lateral and heading feedback, read from the true pose.
LapPolicy centerline_follower(Lane lane) {
  return [lane](const EventFrame&, const LaneWorld& w) {
    const auto& path = w.course().lane(lane);
    const double s = w.pose().s;
    const double v = 1.0;
    const double heading_error = wrap(path.heading_at(s) - w.robot().heading);
    const double omega = v * curvature_at(path, s) + 4.0 * w.pose().d + 4.0 * heading_error;
    const double half = 0.5 * w.config().axle_width * omega;
    return MotorCommand{v - half, v + half};
  };
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("lanekeep_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("a centerline follower scores near zero") {
  const EvaluationParams params;
  for (int scenario : {1, 2, 3}) {
    const auto track = build_scenario(scenario);
    const auto lap = evaluate_lap(centerline_follower(Lane::outer), track, Lane::outer, params);
    CHECK_FALSE(lap.failed);
    CHECK(lap.mean_error < 0.005);
    CHECK(lap.histogram.total() == static_cast<long>(lap.samples.size()));
    for (std::size_t k = 1; k < lap.samples.size(); ++k) CHECK(lap.samples[k - 1].s <= lap.samples[k].s);
  }
}

TEST_CASE("a stationary policy fails on the step limit") {
  EvaluationParams params;
  params.max_steps = 50;
  const auto lap = evaluate_lap([](const EventFrame&, const LaneWorld&) { return MotorCommand{0.0, 0.0}; },
                                build_scenario(1), Lane::outer, params);
  CHECK(lap.failed);
  REQUIRE(lap.termination.has_value());
  CHECK(lap.samples.size() == 50u);
}

TEST_CASE("spinning off the lane is a failure at the crossing") {
  const EvaluationParams params;
  const auto lap = evaluate_lap([](const EventFrame&, const LaneWorld&) { return MotorCommand{1.0, 0.6}; },
                                build_scenario(1), Lane::outer, params);
  CHECK(lap.failed);
  REQUIRE(lap.termination.has_value());
  CHECK(std::abs(lap.termination->d) > params.fail_distance);
}

TEST_CASE("summary of a constant offset") {
  std::vector<LapSample> samples;
  for (int k = 0; k < 100; ++k) samples.push_back({k, 0.1 * (100 - k), k % 2 ? 0.05 : -0.05, 'A'});
  const auto lap = summarize_lap(samples);
  CHECK(lap.mean_error == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(lap.samples.front().s < lap.samples.back().s);
  CHECK(lap.histogram.total() == 100);
}

TEST_CASE("histogram mass is conserved") {
  Histogram h;
  const double xs[] = {-1.0, -0.25, 0.0, 0.2499, 0.25, 3.0};
  for (double x : xs) h.add(x);
  h.add(-0.045);
  h.add(0.055);
  CHECK(h.counts[0] == 1);
  CHECK(h.counts[20] == 1);
  CHECK(h.counts[30] == 1);
  CHECK(h.counts[49] == 1);
  CHECK(h.underflow == 1);
  CHECK(h.overflow == 2);
  CHECK(h.total() == 8);
}

TEST_CASE("lap CSV reproduces the mean error") {
  const auto dir = scratch("lapcsv");
  const auto lap = evaluate_lap(centerline_follower(Lane::outer), build_scenario(3), Lane::outer, {});
  write_lap_csv(dir / "lap.csv", lap);
  CHECK(mean_error_from_csv(dir / "lap.csv") == doctest::Approx(lap.mean_error).epsilon(1e-12));
  write_histogram_csv(dir / "histogram.csv", lap.histogram);
  CHECK(fs::file_size(dir / "histogram.csv") > 0);
  fs::remove_all(dir);
}

TEST_CASE("training time report") {
  using K = TrainingEventKind;
  CHECK_FALSE(training_time_report({}).first_lap.has_value());
  CHECK_FALSE(training_time_report({}).stable.has_value());

  std::vector<TrainingEvent> ev = {
      {10, K::failure, Lane::outer},      {20, K::lap_complete, Lane::inner},
      {30, K::lap_complete, Lane::outer}, {40, K::failure, Lane::inner},
      {50, K::lap_complete, Lane::outer}, {60, K::truncated, Lane::inner},
      {70, K::lap_complete, Lane::inner}, {80, K::lap_complete, Lane::outer},
  };
  auto t = training_time_report(ev, 3);
  CHECK(*t.first_lap == 20);
  CHECK(*t.stable == 80);
  // One lane only never counts as stable.
  std::vector<TrainingEvent> same(6, TrainingEvent{0, K::lap_complete, Lane::outer});
  for (std::size_t k = 0; k < same.size(); ++k) same[k].world_step = static_cast<long>(k);
  t = training_time_report(same, 5);
  CHECK(*t.first_lap == 0);
  CHECK_FALSE(t.stable.has_value());
  ev.push_back({90, K::failure, Lane::inner});
  CHECK(*training_time_report(ev, 3).stable == 80);
  CHECK(*training_time_report({ev.begin(), ev.begin() + 4}, 2).stable == 30);
}

TEST_CASE("configuration documents") {
  ExperimentConfig c;
  c.rstdp_steps = 1234;
  c.dqn.params.gamma = 0.9;
  c.braitenberg.w_high = 420.0;
  const auto back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
  CHECK(config_hash(back) == config_hash(c));
  CHECK(config_hash(ExperimentConfig{}) != config_hash(c));
  CHECK(hex_hash(0xabcULL).size() == 16u);

  auto doc = config_to_json(ExperimentConfig{});
  doc["rstdp"]["stepz"] = 5;
  CHECK_THROWS_AS(config_from_json(doc), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"rstdp_steps", 5}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"dqn", {{"epsilon_clock", "wall"}}}}), ConfigError);
  CHECK_FALSE(config_from_json(nlohmann::json{{"dqn", {{"epsilon_clock", "action"}}}}).dqn.params.epsilon_in_world_steps);

  // Missing keys keep defaults.
  const auto partial = config_from_json(nlohmann::json{{"rstdp", {{"steps", 77}}}});
  CHECK(partial.rstdp_steps == 77);
  CHECK(partial.stable_laps == ExperimentConfig{}.stable_laps);
}

TEST_CASE("manifest round-trip") {
  RunManifest m;
  m.scenario = 2;
  m.controller = "rstdp";
  m.seed = 17;
  m.config_hash = "00ff";
  m.outputs["lap"] = "lap.csv";
  m.first_lap_steps = 1200;
  m.mean_error = 0.0125;
  const auto dir = scratch("manifest");
  write_manifest(dir, m);
  const auto back = read_manifest(dir);
  CHECK(back.scenario == 2);
  CHECK(back.controller == "rstdp");
  CHECK(back.seed == 17u);
  CHECK(back.outputs == m.outputs);
  CHECK(back.first_lap_steps == 1200);
  CHECK_FALSE(back.stable_steps.has_value());
  CHECK(*back.mean_error == 0.0125);
  CHECK(back.to_json() == m.to_json());
  CHECK_THROWS_AS(RunManifest::from_json(nlohmann::json{{"format", "other"}}), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("missing inputs are rejected before any simulation") {
  const auto dir = scratch("missing");
  RunRequest r;
  r.out = dir / "out";
  r.verb = "transfer";
  CHECK_THROWS_AS(run_experiment(r), ConfigError);
  r.archive = dir / "nope.bin";
  r.checkpoint = dir / "nope.json";
  CHECK_THROWS_AS(run_experiment(r), ConfigError);
  r.verb = "run-snn";
  CHECK_THROWS_AS(run_experiment(r), ConfigError);
  r.verb = "evaluate-lap";
  r.controller = "dqn";
  CHECK_THROWS_AS(run_experiment(r), ConfigError);
  r.verb = "fly";
  CHECK_THROWS_AS(run_experiment(r), ConfigError);
  CHECK_FALSE(fs::exists(dir / "out" / "manifest.json"));
  fs::remove_all(dir);
}

TEST_CASE("runs are reproducible from the seed") {
  const auto dir = scratch("determinism");
  RunRequest r;
  r.verb = "train-rstdp";
  r.scenario = 1;
  r.seed = 5;
  r.steps = 600;
  r.config.evaluation.max_steps = 300;
  r.out = dir / "a";
  const auto ma = run_experiment(r);
  r.out = dir / "b";
  const auto mb = run_experiment(r);
  for (const char* f : {"lap.csv", "events.csv", "weights.csv", "terminations.csv", "rstdp_weights.json"}) {
    CHECK_MESSAGE(slurp(dir / "a" / f) == slurp(dir / "b" / f), f);
  }
  CHECK(ma.config_hash == mb.config_hash);
  CHECK(read_manifest(dir / "a").to_json() == ma.to_json());

  r.seed = 6;
  r.out = dir / "c";
  run_experiment(r);
  CHECK(slurp(dir / "a" / "weights.csv") != slurp(dir / "c" / "weights.csv"));
  fs::remove_all(dir);
}

TEST_CASE("event dumping") {
  const auto dir = scratch("dump");
  RunRequest r;
  r.verb = "run-braitenberg";
  r.out = dir / "out";
  r.dump_dir = dir / "dump";
  r.dump_every = 100;
  r.config.evaluation.max_steps = 250;
  run_experiment(r);
  CHECK(fs::file_size(dir / "dump" / "events.csv") > 100);
  CHECK(fs::exists(dir / "dump" / "render_000000.pgm"));
  CHECK(fs::exists(dir / "dump" / "render_000200.pgm"));
  fs::remove_all(dir);
}

TEST_CASE("derived seeds are distinct streams") {
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
  CHECK(derive_seed(1, 0) == derive_seed(1, 0));
}

TEST_CASE("shipped scenario and config files match the built-in defaults") {
  const fs::path root = LANEKEEP_SOURCE_DIR;
  for (int k = 1; k <= 3; ++k) {
    CHECK(load_scenario(root / "scenarios" / ("s" + std::to_string(k) + ".json")) == build_scenario(k));
  }
  CHECK(config_hash(load_config(root / "configs" / "default.json")) == config_hash(ExperimentConfig{}));
  const auto w = load_braitenberg(root / "configs" / "braitenberg_weights.json");
  CHECK(w.left == braitenberg_ramp().left);
  CHECK(w.right == braitenberg_ramp().right);
}
