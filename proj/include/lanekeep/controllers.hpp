#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "lanekeep/dqn.hpp"
#include "lanekeep/dvs.hpp"
#include "lanekeep/rstdp.hpp"
#include "lanekeep/snn.hpp"
#include "lanekeep/training_log.hpp"
#include "lanekeep/world.hpp"

namespace lanekeep {

/// A closed-loop controller stepped once per 50 ms camera frame.
class Controller {
public:
  virtual ~Controller() = default;
  virtual MotorCommand step(const EventFrame& frame) = 0;
  virtual std::string kind() const = 0;
};

struct SteeringParams {
  double v_max{1.5};
  double v_min{1.0};
  double c_turn{0.5};
  int n_max{15};
};

struct DecodeState {
  double v{0.0};
  double s{0.0};
};

/// Spike counts to wheel speeds with activity-weighted smoothing; updates `state`.
MotorCommand decode_motors(int n_left, int n_right, DecodeState& state, const SteeringParams& p);

/// (r_left, r_right) = (-d * c_r, +d * c_r).
std::pair<double, double> rstdp_reward(double d, double c_r);

/// 4 x 8 grid (row-major, top row first) for one motor neuron.
using WeightGrid = std::array<double, kRstdpInputs>;

WeightGrid mirror_grid(const WeightGrid& g);

struct RStdpConfig {
  LifNetwork::Params network;
  PlasticityParams plasticity;
  SteeringParams steering;
  RateEncoding encoding;
  CropBand band;
  double window_ms{50.0};
  double reset_distance{0.2};
  long snapshot_interval{8000};
};

/// 32 Poisson inputs onto two LIF motor neurons (0 = left, 1 = right).
class RStdpController : public Controller {
public:
  RStdpController(const RStdpConfig& config, std::uint64_t seed);
  /// Static network with the given grids (Braitenberg and evaluation of learned weights).
  RStdpController(const RStdpConfig& config, const WeightGrid& left, const WeightGrid& right,
                  std::uint64_t seed);

  MotorCommand step(const EventFrame& frame) override;
  std::string kind() const override { return kind_; }

  void set_learning(bool on) { learning_ = on; }
  bool learning() const { return learning_; }
  /// Per-motor dopamine impulses for the current lane-center distance.
  void reward(double d);

  const WindowResult& last_window() const { return last_; }
  const LifNetwork& network() const { return net_; }
  LifNetwork& network() { return net_; }
  const RStdpPlasticity& plasticity() const { return plasticity_; }
  const DecodeState& decode_state() const { return decode_; }
  WeightGrid grid(int motor) const;
  const RStdpConfig& config() const { return config_; }

protected:
  std::string kind_{"rstdp"};

private:
  RStdpConfig config_;
  Rng rng_;
  LifNetwork net_;
  RStdpPlasticity plasticity_;
  DecodeState decode_;
  WindowResult last_;
  bool learning_{false};
};

struct WeightSnapshot {
  long step{};
  WeightGrid left{};
  WeightGrid right{};
};

struct TrialTermination {
  int trial{};
  long step{};
  double s{};
  char section{};
};

struct RStdpTrainingResult {
  std::vector<TrainingEvent> events;
  std::vector<WeightSnapshot> snapshots;
  std::vector<TrialTermination> terminations;
  long world_steps{};
};

/// Closed-loop learning for `steps` control cycles; episodes end on a failure
/// (|d| > reset distance) or a completed lap, and both switch lanes.
/// Stops early once `stop_when_stable` consecutive alternating laps are done (0 = never),
/// or after the first completed lap when `stop_at_first_lap` is set.
RStdpTrainingResult rstdp_train(const TrackSpec& track, RStdpController& controller, long steps,
                                int stop_when_stable = 0, const WorldConfig& world = {},
                                bool stop_at_first_lap = false);

struct BraitenbergWeights {
  WeightGrid left{};
  WeightGrid right{};
};

/// Linear ramp from low at the top outer corner to high at the bottom center of the
/// half that turns away from the stimulus; zero on the other half.
BraitenbergWeights braitenberg_ramp(double w_low = 100.0, double w_high = 500.0);

BraitenbergWeights load_braitenberg(const std::filesystem::path& path);
void save_braitenberg(const std::filesystem::path& path, const BraitenbergWeights& w);

class BraitenbergController : public RStdpController {
public:
  BraitenbergController(const RStdpConfig& config, const BraitenbergWeights& weights,
                        std::uint64_t seed);
};

}  // namespace lanekeep
