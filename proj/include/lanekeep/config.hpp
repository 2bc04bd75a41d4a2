#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "lanekeep/controllers.hpp"
#include "lanekeep/dqn.hpp"
#include "lanekeep/transfer.hpp"
#include "lanekeep/world.hpp"

namespace lanekeep {

struct EvaluationParams {
  double fail_distance{0.5};  // m
  long max_steps{20000};      // world steps before an unfinished lap counts as failed
};

struct BraitenbergParams {
  std::string weights_file;  // empty = closed-form ramp
  double w_low{100.0};
  double w_high{500.0};
};

/// Every tunable of every pipeline.
struct ExperimentConfig {
  WorldConfig world;
  DqnTrainingConfig dqn;
  DatasetOptions dataset;
  ClassifierParams classifier;
  SnnControlParams snn;
  RStdpConfig rstdp;
  long rstdp_steps{40000};
  int stable_laps{5};
  BraitenbergParams braitenberg;
  EvaluationParams evaluation;
};

nlohmann::json config_to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults; unknown keys throw ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

/// FNV-1a 64 of the canonical serialization.
std::uint64_t config_hash(const ExperimentConfig& config);
std::string hex_hash(std::uint64_t h);

}  // namespace lanekeep
