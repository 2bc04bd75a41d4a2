#include "lanekeep/dqn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "lanekeep/errors.hpp"
#include "lanekeep/world.hpp"

namespace lanekeep {

double gaussian_reward(double d, double sigma) { return std::exp(-d * d / (2.0 * sigma * sigma)); }

double EpsilonSchedule::value(long t) const {
  if (t <= pre_training_steps) return start;
  if (annealing_steps <= 0) return end;
  const double frac = static_cast<double>(t - pre_training_steps) / static_cast<double>(annealing_steps);
  if (frac >= 1.0) return end;
  return start + (end - start) * frac;
}

MotorCommand action_to_motors(int action, double vs, double vt) {
  switch (action) {
    case 0: return {vs - vt, vs + vt};
    case 1: return {vs, vs};
    case 2: return {vs + vt, vs - vt};
    default: throw ContractError("action must be 0, 1 or 2");
  }
}

Eigen::VectorXd state_vector(std::span<const std::uint8_t> state) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(state.size()));
  for (std::size_t i = 0; i < state.size(); ++i) x[static_cast<Eigen::Index>(i)] = state[i];
  return x;
}

int select_action(const DenseNet& q, std::span<const std::uint8_t> state, double epsilon, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < epsilon) {
    return std::uniform_int_distribution<int>(0, static_cast<int>(q.output_size()) - 1)(rng);
  }
  return argmax(q.forward(state_vector(state)));
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
  items_.reserve(capacity);
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, Rng& rng) const {
  if (items_.empty()) throw ContractError("sampling from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> u(0, items_.size() - 1);
  std::vector<std::size_t> out(n);
  for (auto& i : out) i = u(rng);
  return out;
}

void StateArchive::append(std::span<const int> counts, long action_step) {
  Entry e;
  e.counts.resize(counts.size());
  std::transform(counts.begin(), counts.end(), e.counts.begin(), [](int c) {
    return static_cast<std::uint16_t>(std::clamp(c, 0, 65535));
  });
  e.action_step = action_step;
  entries_.push_back(std::move(e));
}

namespace {

constexpr char kArchiveMagic[8] = {'L', 'K', 'A', 'R', 'C', 'H', 'V', '\0'};
constexpr std::uint32_t kArchiveVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw ConfigError("truncated state archive");
  return v;
}

}  // namespace

void StateArchive::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write state archive: " + path.string());
  out.write(kArchiveMagic, sizeof kArchiveMagic);
  put<std::uint32_t>(out, kArchiveVersion);
  const std::uint32_t cells = entries_.empty() ? 0 : static_cast<std::uint32_t>(entries_[0].counts.size());
  put<std::uint32_t>(out, cells);
  put<std::uint64_t>(out, entries_.size());
  for (const auto& e : entries_) {
    if (e.counts.size() != cells) throw ContractError("state archive entries differ in size");
    put<std::int64_t>(out, e.action_step);
    out.write(reinterpret_cast<const char*>(e.counts.data()),
              static_cast<std::streamsize>(cells * sizeof(std::uint16_t)));
  }
}

StateArchive StateArchive::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read state archive: " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kArchiveMagic, sizeof magic) != 0) {
    throw ConfigError("not a state archive: " + path.string());
  }
  if (get<std::uint32_t>(in) != kArchiveVersion) throw ConfigError("unsupported state archive version");
  const auto cells = get<std::uint32_t>(in);
  const auto n = get<std::uint64_t>(in);
  StateArchive a;
  a.entries_.resize(n);
  for (auto& e : a.entries_) {
    e.action_step = get<std::int64_t>(in);
    e.counts.resize(cells);
    in.read(reinterpret_cast<char*>(e.counts.data()), static_cast<std::streamsize>(cells * sizeof(std::uint16_t)));
    if (!in) throw ConfigError("truncated state archive");
  }
  return a;
}

DenseNet make_q_network(const DqnParams& p, Rng& rng) {
  return DenseNet::make("dqn-512-200-200-3", kDqnStateSize,
                        {{p.hidden, true, Activation::relu},
                         {p.hidden, true, Activation::relu},
                         {kActionCount, true, Activation::identity}},
                        rng);
}

DqnAgent::DqnAgent(const DqnParams& params, std::uint64_t seed)
    : params_(params), rng_(seed), buffer_(params.buffer_size) {
  online_ = make_q_network(params_, rng_);
  target_ = online_;
  adam_ = Adam(online_, AdamParams{params_.learning_rate});
}

int DqnAgent::act(std::span<const std::uint8_t> state, double epsilon) {
  return select_action(online_, state, epsilon, rng_);
}

double train_on_transitions(DenseNet& online, const DenseNet& target, Adam& adam,
                            std::span<const Transition* const> batch, double gamma,
                            bool double_dqn) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  if (n == 0) throw ContractError("empty transition batch");
  const Eigen::Index dim = online.input_size();
  Eigen::MatrixXd s(dim, n);
  Eigen::MatrixXd s_next(dim, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    s.col(c) = state_vector(batch[static_cast<std::size_t>(c)]->s);
    s_next.col(c) = state_vector(batch[static_cast<std::size_t>(c)]->s_next);
  }
  const Eigen::MatrixXd q_next_target = target.forward_batch(s_next);
  Eigen::MatrixXd q_next_online;
  if (double_dqn) q_next_online = online.forward_batch(s_next);

  Batch b;
  b.inputs = std::move(s);
  b.targets = online.forward_batch(b.inputs);
  b.mask = Eigen::MatrixXd::Zero(b.targets.rows(), n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto& t = *batch[static_cast<std::size_t>(c)];
    double y = t.r;
    if (!t.terminal) {
      const double next = double_dqn ? q_next_target(argmax(q_next_online.col(c)), c)
                                     : q_next_target.col(c).maxCoeff();
      y += gamma * next;
    }
    b.targets(t.a, c) = y;
    b.mask(t.a, c) = 1.0;
  }
  return train_step_adam(online, adam, b, LossKind::mse);
}

std::optional<double> DqnAgent::train_batch() {
  const auto size = static_cast<std::size_t>(params_.batch_size);
  if (buffer_.size() < size) return std::nullopt;
  std::vector<const Transition*> batch;
  for (auto i : buffer_.sample_indices(size, rng_)) batch.push_back(&buffer_.at(i));
  const double loss = train_on_transitions(online_, target_, adam_, batch, params_.gamma, params_.double_dqn);
  soft_update(target_, online_, params_.tau);
  return loss;
}

GreedyEvaluation greedy_rollout(const DenseNet& q, const TrackSpec& track, Lane lane,
                                const DqnParams& params, int max_action_steps,
                                const WorldConfig& world_config) {
  LaneWorld world(track, world_config);
  world.place(lane);
  FrameQueue queue;
  BinaryState s(kDqnStateSize, 0);
  GreedyEvaluation out;
  while (out.action_steps < max_action_steps) {
    const auto cmd = action_to_motors(argmax(q.forward(state_vector(s))), params.v_straight, params.v_turn);
    for (int k = 0; k < params.frames_per_action; ++k) {
      auto ws = world.step(cmd.v_left, cmd.v_right);
      queue.push(std::move(ws.frame));
      if (std::abs(ws.pose.d) > params.reset_distance) {
        out.off_center = true;
        return out;
      }
    }
    ++out.action_steps;
    s = condense_dqn_state(queue, params.band).binary;
  }
  return out;
}

DqnTrainingResult run_dqn_training(const TrackSpec& track, const DqnTrainingConfig& config,
                                   DqnAgent& agent, const ProgressFn& progress) {
  const auto& p = config.params;
  if (p.frames_per_action < 1 || p.update_frequency < 1 || p.max_episode_steps < 1) {
    throw ConfigError("DQN step parameters must be positive");
  }
  DqnTrainingResult result;
  LaneWorld world(track, config.world);
  long next_eval = config.eval_interval > 0 ? config.eval_interval : -1;
  long stop_at = -1;
  int episode = 0;
  bool first_episode = true;

  while (world.time_step() < config.total_world_steps && (stop_at < 0 || world.time_step() < stop_at)) {
    if (!first_episode) world.reset();
    first_episode = false;
    const Lane lane = world.episode().active_lane;
    const double lap = world.course().lap_length(lane);
    FrameQueue queue;
    BinaryState s(kDqnStateSize, 0);
    DqnEpisode log;
    log.episode = episode++;
    log.lane = lane;
    int laps = 0;

    while (true) {
      const long clock = p.epsilon_in_world_steps ? world.time_step() : result.action_steps;
      const double eps = p.epsilon.value(clock);
      const int a = agent.act(s, eps);
      const auto cmd = action_to_motors(a, p.v_straight, p.v_turn);
      bool off_center = false;
      WorldStep ws;
      for (int k = 0; k < p.frames_per_action; ++k) {
        ws = world.step(cmd.v_left, cmd.v_right);
        queue.push(ws.frame);
        if (progress) progress(world.time_step());
        if (world.progress() >= (laps + 1) * lap) {
          ++laps;
          result.events.push_back({world.time_step(), TrainingEventKind::lap_complete, lane,
                                   ws.pose.s, ws.pose.section});
        }
        if (std::abs(ws.pose.d) > p.reset_distance) {
          off_center = true;
          break;
        }
      }
      ++result.action_steps;
      ++log.action_steps;
      const auto next = condense_dqn_state(queue, p.band);
      result.archive.append(next.grid.counts, result.action_steps);
      const double r = gaussian_reward(ws.pose.d, p.reward_sigma);
      log.cumulative_reward += r;
      agent.remember({s, a, r, next.binary, off_center});
      if (clock > p.epsilon.pre_training_steps &&
          result.action_steps % p.update_frequency == 0) {
        if (auto loss = agent.train_batch()) result.losses.push_back(*loss);
      }

      if (next_eval > 0 && world.time_step() >= next_eval) {
        auto ev = greedy_rollout(agent.online(), track, Lane::outer, p, config.eval_action_steps, config.world);
        ev.world_step = world.time_step();
        result.evaluations.push_back(ev);
        next_eval += config.eval_interval;
        if (config.stop_after_success > 0 && stop_at < 0 && ev.action_steps >= config.eval_action_steps) {
          stop_at = world.time_step() + config.stop_after_success;
        }
      }

      if (off_center) {
        log.reason = TerminalReason::off_center;
        result.events.push_back({world.time_step(), TrainingEventKind::failure, lane, ws.pose.s,
                                 ws.pose.section});
        break;
      }
      if (log.action_steps >= p.max_episode_steps || world.time_step() >= config.total_world_steps ||
          (stop_at >= 0 && world.time_step() >= stop_at)) {
        log.reason = log.action_steps >= p.max_episode_steps ? TerminalReason::step_limit
                                                             : TerminalReason::none;
        result.events.push_back({world.time_step(), TrainingEventKind::truncated, lane, ws.pose.s,
                                 ws.pose.section});
        break;
      }
      s = next.binary;
    }
    log.world_step_end = world.time_step();
    result.episodes.push_back(log);
  }
  result.world_steps = world.time_step();
  return result;
}

}  // namespace lanekeep
