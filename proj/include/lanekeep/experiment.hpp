#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lanekeep/config.hpp"
#include "lanekeep/controllers.hpp"
#include "lanekeep/dqn.hpp"
#include "lanekeep/training_log.hpp"
#include "lanekeep/transfer.hpp"
#include "lanekeep/world.hpp"

namespace lanekeep {

struct LapSample {
  long t{};    // world step
  double s{};  // distance driven along the lane since the start marker, m
  double d{};
  char section{};
};

/// Fixed-width bins over [lo, lo + bins * width); out-of-range samples are counted separately.
struct Histogram {
  double lo{-0.25};
  double width{0.01};
  std::vector<long> counts = std::vector<long>(50, 0);
  long underflow{0};
  long overflow{0};

  void add(double x);
  long total() const;
};

struct LapEvaluation {
  std::vector<LapSample> samples;
  double mean_error{};
  Histogram histogram;
  bool failed{false};
  std::optional<LapSample> termination;
};

/// Mean |d| and histogram of already collected samples (sorted by s, stable).
LapEvaluation summarize_lap(std::vector<LapSample> samples);

using LapPolicy = std::function<MotorCommand(const EventFrame&, const LaneWorld&)>;

/// Drives one lap from the start marker of `lane`, sampling every 50 ms. The run fails
/// when |d| exceeds the failure distance or the lap is not done within max_steps.
LapEvaluation evaluate_lap(const LapPolicy& policy, const TrackSpec& track, Lane lane,
                           const EvaluationParams& params, const WorldConfig& world = {});
LapEvaluation evaluate_lap(Controller& controller, const TrackSpec& track, Lane lane,
                           const EvaluationParams& params, const WorldConfig& world = {});

/// Independent stream seed derived from a run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct RStdpRun {
  RStdpTrainingResult training;
  TrainingTimes times;
  WeightGrid left{};
  WeightGrid right{};
};

RStdpRun run_rstdp(const TrackSpec& track, const ExperimentConfig& config, std::uint64_t seed);
std::unique_ptr<RStdpController> frozen_rstdp(const RStdpRun& run, const ExperimentConfig& config,
                                              std::uint64_t seed);

BraitenbergWeights braitenberg_weights(const ExperimentConfig& config);

struct DqnRun {
  DenseNet q;
  DqnTrainingResult training;
  TrainingTimes times;
  int best_greedy_steps{};
};

DqnRun run_dqn(const TrackSpec& track, const ExperimentConfig& config, std::uint64_t seed,
               const ProgressFn& progress = {});

struct TransferRun {
  StateActionDataset dataset;
  ClassifierResult classifier;
  DenseNet normalized;
  double agreement{};  // spiking vs classifier on up to 200 held-out samples
};

TransferRun run_transfer(const StateArchive& archive, const DenseNet& q,
                         const ExperimentConfig& config, std::uint64_t seed);

struct RunManifest {
  int scenario{};
  std::string controller;
  std::uint64_t seed{};
  std::string config_hash;
  std::map<std::string, std::string> outputs;
  std::optional<long> first_lap_steps;
  std::optional<long> stable_steps;
  std::optional<double> mean_error;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& doc);
};

void write_manifest(const std::filesystem::path& dir, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& dir);

// CSV artifacts
void write_lap_csv(const std::filesystem::path& path, const LapEvaluation& lap);
void write_histogram_csv(const std::filesystem::path& path, const Histogram& h);
void write_events_csv(const std::filesystem::path& path, std::span<const TrainingEvent> events);
void write_weight_snapshots_csv(const std::filesystem::path& path, std::span<const WeightSnapshot> snaps);
void write_terminations_csv(const std::filesystem::path& path, std::span<const TrialTermination> t);
void write_episodes_csv(const std::filesystem::path& path, std::span<const DqnEpisode> episodes);

/// Mean |d| recomputed from a lap CSV written by write_lap_csv.
double mean_error_from_csv(const std::filesystem::path& path);

struct CompareRow {
  std::string controller;
  LapEvaluation lap;
  std::optional<long> first_lap_steps;
  std::optional<long> stable_steps;
};

/// Trains (where needed) and evaluates all four controllers on one scenario.
std::vector<CompareRow> compare_controllers(const TrackSpec& track, const ExperimentConfig& config,
                                            std::uint64_t seed);

/// Pipelines behind the command-line verbs; each writes its artifacts and manifest into `out`.
struct RunRequest {
  std::string verb;
  int scenario{1};
  std::uint64_t seed{1};
  ExperimentConfig config;
  std::filesystem::path out;
  std::filesystem::path scenario_file;  // optional override of the built-in scenario
  std::filesystem::path archive;        // transfer
  std::filesystem::path checkpoint;     // transfer (DQN), run-snn, evaluate-lap
  std::string controller;               // evaluate-lap: rstdp | braitenberg | dqn | dqn-snn
  std::vector<std::filesystem::path> runs;  // report
  std::optional<long> steps;            // overrides the training budget
  std::filesystem::path dump_dir;       // evaluation event CSV and render snapshots
  int dump_every{20};                   // world steps between PGM snapshots
};

/// Wraps a policy so that every evaluated frame is appended to dir/events.csv
/// (t, px, py, polarity) and every n-th render is written as a PGM.
LapPolicy dumping_policy(LapPolicy inner, const std::filesystem::path& dir, int every);

RunManifest run_experiment(const RunRequest& request);

}  // namespace lanekeep
