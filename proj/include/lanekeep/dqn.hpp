#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "lanekeep/dvs.hpp"
#include "lanekeep/mlp.hpp"
#include "lanekeep/snn.hpp"
#include "lanekeep/track.hpp"
#include "lanekeep/training_log.hpp"
#include "lanekeep/world.hpp"

namespace lanekeep {

inline constexpr int kDqnStateSize = 512;
inline constexpr int kActionCount = 3;

/// exp(-d^2 / (2 sigma^2)); peak 1 at the lane center.
double gaussian_reward(double d, double sigma = 0.15);

struct EpsilonSchedule {
  double start{1.0};
  double end{0.1};
  long pre_training_steps{1000};
  long annealing_steps{49000};

  double value(long action_step) const;
};

struct MotorCommand {
  double v_left{};
  double v_right{};

  friend bool operator==(const MotorCommand&, const MotorCommand&) = default;
};

/// 0 = left, 1 = straight, 2 = right.
MotorCommand action_to_motors(int action, double v_straight = 1.0, double v_turn = 0.25);

using BinaryState = std::vector<std::uint8_t>;

Eigen::VectorXd state_vector(std::span<const std::uint8_t> state);

/// Uniform random action with probability epsilon, else argmax Q (lowest index on ties).
int select_action(const DenseNet& q, std::span<const std::uint8_t> state, double epsilon, Rng& rng);

struct Transition {
  BinaryState s;
  int a{};
  double r{};
  BinaryState s_next;
  bool terminal{false};
};

class ReplayBuffer {
public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return items_.at(i); }
  /// Uniform indices with replacement.
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const;

private:
  std::size_t capacity_;
  std::size_t next_{0};
  std::vector<Transition> items_;
};

/// Append-only record of every visited state as 32x16 event counts.
class StateArchive {
public:
  struct Entry {
    std::vector<std::uint16_t> counts;
    long action_step{};
  };

  void append(std::span<const int> counts, long action_step);
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<Entry>& entries() const { return entries_; }
  const Entry& at(std::size_t i) const { return entries_.at(i); }

  void save(const std::filesystem::path& path) const;
  static StateArchive load(const std::filesystem::path& path);

private:
  std::vector<Entry> entries_;
};

struct DqnParams {
  int hidden{200};
  double learning_rate{1e-4};
  double gamma{0.99};
  int batch_size{32};
  int update_frequency{4};
  double tau{0.001};
  std::size_t buffer_size{5000};
  EpsilonSchedule epsilon;
  /// Clock of the epsilon schedule and the replay warm-up: world steps (50 ms) or action steps.
  bool epsilon_in_world_steps{true};
  bool double_dqn{true};
  double reward_sigma{0.15};
  double reset_distance{0.5};
  int max_episode_steps{1000};
  int frames_per_action{10};
  double v_straight{1.0};
  double v_turn{0.25};
  CropBand band;
};

DenseNet make_q_network(const DqnParams& p, Rng& rng);

/// Online and target networks, optimizer and replay memory.
class DqnAgent {
public:
  DqnAgent(const DqnParams& params, std::uint64_t seed);

  int act(std::span<const std::uint8_t> state, double epsilon);
  void remember(Transition t) { buffer_.push(std::move(t)); }
  /// One minibatch step followed by the soft target update. Returns nullopt if the
  /// buffer holds fewer transitions than a batch.
  std::optional<double> train_batch();

  const DenseNet& online() const { return online_; }
  DenseNet& online() { return online_; }
  const DenseNet& target() const { return target_; }
  DenseNet& target() { return target_; }
  const Adam& optimizer() const { return adam_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const DqnParams& params() const { return params_; }
  Rng& rng() { return rng_; }

private:
  DqnParams params_;
  Rng rng_;
  DenseNet online_;
  DenseNet target_;
  Adam adam_;
  ReplayBuffer buffer_;
};

/// Double-DQN (or plain max) minibatch update on explicit networks.
double train_on_transitions(DenseNet& online, const DenseNet& target, Adam& adam,
                            std::span<const Transition* const> batch, double gamma,
                            bool double_dqn);

struct DqnEpisode {
  int episode{};
  Lane lane{Lane::outer};
  int action_steps{};
  double cumulative_reward{};
  TerminalReason reason{TerminalReason::none};
  long world_step_end{};
};

struct GreedyEvaluation {
  long world_step{};  // training time at which the evaluation ran
  int action_steps{};
  bool off_center{false};
};

struct DqnTrainingConfig {
  DqnParams params;
  long total_world_steps{150000};
  long eval_interval{25000};       // world steps; 0 disables
  int eval_action_steps{500};
  long stop_after_success{0};      // extra world steps after the first passing evaluation; 0 = run to budget
  WorldConfig world;
};

struct DqnTrainingResult {
  std::vector<DqnEpisode> episodes;
  std::vector<TrainingEvent> events;
  std::vector<GreedyEvaluation> evaluations;
  std::vector<double> losses;
  StateArchive archive;
  long world_steps{};
  long action_steps{};
};

using ProgressFn = std::function<void(long world_step)>;

DqnTrainingResult run_dqn_training(const TrackSpec& track, const DqnTrainingConfig& config,
                                   DqnAgent& agent, const ProgressFn& progress = {});

/// Greedy rollout from the start of `lane`; counts action steps until off-center or the cap.
GreedyEvaluation greedy_rollout(const DenseNet& q, const TrackSpec& track, Lane lane,
                                const DqnParams& params, int max_action_steps,
                                const WorldConfig& world = {});

}  // namespace lanekeep
