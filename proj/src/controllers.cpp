#include "lanekeep/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "lanekeep/errors.hpp"
#include "lanekeep/world.hpp"

namespace lanekeep {

MotorCommand decode_motors(int n_left, int n_right, DecodeState& state, const SteeringParams& p) {
  if (n_left < 0 || n_right < 0) throw ContractError("spike counts must be non-negative");
  if (p.n_max < 1) throw ConfigError("n_max must be >= 1");
  const double nmax = p.n_max;
  const double ml = std::min(n_left, p.n_max) / nmax;
  const double mr = std::min(n_right, p.n_max) / nmax;
  const double a = ml - mr;
  const double turn = p.c_turn * a;
  const double speed = -std::abs(a) * (p.v_max - p.v_min) + p.v_max;
  const double c = std::sqrt((ml * ml + mr * mr) / 2.0);
  state.v = c * speed + (1.0 - c) * state.v;
  state.s = c * turn + (1.0 - c) * state.s;
  return {state.v + state.s, state.v - state.s};
}

std::pair<double, double> rstdp_reward(double d, double c_r) { return {-d * c_r, d * c_r}; }

WeightGrid mirror_grid(const WeightGrid& g) {
  WeightGrid out{};
  for (int r = 0; r < kRstdpRows; ++r) {
    for (int c = 0; c < kRstdpColumns; ++c) {
      out[static_cast<std::size_t>(r * kRstdpColumns + c)] =
          g[static_cast<std::size_t>(r * kRstdpColumns + (kRstdpColumns - 1 - c))];
    }
  }
  return out;
}

namespace {

Eigen::MatrixXd weights_from(const WeightGrid& left, const WeightGrid& right) {
  Eigen::MatrixXd w(2, kRstdpInputs);
  for (int i = 0; i < kRstdpInputs; ++i) {
    w(0, i) = left[static_cast<std::size_t>(i)];
    w(1, i) = right[static_cast<std::size_t>(i)];
  }
  return w;
}

}  // namespace

RStdpController::RStdpController(const RStdpConfig& config, std::uint64_t seed)
    : RStdpController(config, [&] {
        WeightGrid g;
        g.fill(config.plasticity.w_init);
        return g;
      }(), [&] {
        WeightGrid g;
        g.fill(config.plasticity.w_init);
        return g;
      }(), seed) {
  learning_ = true;
}

RStdpController::RStdpController(const RStdpConfig& config, const WeightGrid& left,
                                 const WeightGrid& right, std::uint64_t seed)
    : config_(config),
      rng_(seed),
      net_(weights_from(left, right), config.network),
      plasticity_(kRstdpInputs, 2, config.plasticity, config.network.dt_ms) {}

MotorCommand RStdpController::step(const EventFrame& frame) {
  const auto rates = condense_rstdp_input(frame, config_.band, config_.encoding);
  last_ = net_.run_window(rates, config_.window_ms, rng_, learning_ ? &plasticity_ : nullptr);
  return decode_motors(last_.counts[0], last_.counts[1], decode_, config_.steering);
}

void RStdpController::reward(double d) {
  const auto [left, right] = rstdp_reward(d, config_.plasticity.c_r);
  plasticity_.inject_reward(0, left);
  plasticity_.inject_reward(1, right);
}

WeightGrid RStdpController::grid(int motor) const {
  WeightGrid g{};
  for (int i = 0; i < kRstdpInputs; ++i) g[static_cast<std::size_t>(i)] = net_.weights()(motor, i);
  return g;
}

RStdpTrainingResult rstdp_train(const TrackSpec& track, RStdpController& ctl, long steps,
                                int stop_when_stable, const WorldConfig& world_config,
                                bool stop_at_first_lap) {
  const auto& cfg = ctl.config();
  RStdpTrainingResult out;
  LaneWorld world(track, world_config);
  int trial = 0;
  int streak = 0;
  bool inner = false;
  bool outer = false;
  for (long k = 0; k < steps; ++k) {
    if (cfg.snapshot_interval > 0 && k % cfg.snapshot_interval == 0) {
      out.snapshots.push_back({k, ctl.grid(0), ctl.grid(1)});
    }
    const auto cmd = ctl.step(world.last_frame());
    const auto ws = world.step(cmd.v_left, cmd.v_right);
    const Lane lane = world.episode().active_lane;
    if (ctl.learning()) ctl.reward(ws.pose.d);
    if (std::abs(ws.pose.d) > cfg.reset_distance) {
      out.events.push_back({world.time_step(), TrainingEventKind::failure, lane, ws.pose.s, ws.pose.section});
      out.terminations.push_back({trial++, world.time_step(), ws.pose.s, ws.pose.section});
      streak = 0;
      inner = outer = false;
      world.reset();
    } else if (ws.lap_complete) {
      out.events.push_back({world.time_step(), TrainingEventKind::lap_complete, lane, ws.pose.s, ws.pose.section});
      ++trial;
      ++streak;
      (lane == Lane::inner ? inner : outer) = true;
      world.reset();
      if (stop_at_first_lap) break;
      if (stop_when_stable > 0 && streak >= stop_when_stable && inner && outer) break;
    }
  }
  out.world_steps = world.time_step();
  if (cfg.snapshot_interval > 0) out.snapshots.push_back({out.world_steps, ctl.grid(0), ctl.grid(1)});
  return out;
}

BraitenbergWeights braitenberg_ramp(double low, double high) {
  BraitenbergWeights w{};
  const int half = kRstdpColumns / 2;
  for (int r = 0; r < kRstdpRows; ++r) {
    for (int c = half; c < kRstdpColumns; ++c) {
      const double down = static_cast<double>(r) / (kRstdpRows - 1);
      const double inward = static_cast<double>(kRstdpColumns - 1 - c) / (half - 1);
      w.right[static_cast<std::size_t>(r * kRstdpColumns + c)] = low + (high - low) * 0.5 * (down + inward);
    }
  }
  w.left = mirror_grid(w.right);
  return w;
}

namespace {

nlohmann::json grid_json(const WeightGrid& g) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < kRstdpRows; ++r) {
    rows.push_back(std::vector<double>(g.begin() + r * kRstdpColumns, g.begin() + (r + 1) * kRstdpColumns));
  }
  return rows;
}

WeightGrid grid_from(const nlohmann::json& j) {
  if (j.size() != static_cast<std::size_t>(kRstdpRows)) throw ConfigError("weight grid needs 4 rows");
  WeightGrid g{};
  for (int r = 0; r < kRstdpRows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (row.size() != static_cast<std::size_t>(kRstdpColumns)) throw ConfigError("weight grid needs 8 columns");
    for (int c = 0; c < kRstdpColumns; ++c) {
      g[static_cast<std::size_t>(r * kRstdpColumns + c)] = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return g;
}

}  // namespace

BraitenbergWeights load_braitenberg(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read weights: " + path.string());
  try {
    const auto doc = nlohmann::json::parse(in);
    return {grid_from(doc.at("left")), grid_from(doc.at("right"))};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad weight file " + path.string() + ": " + e.what());
  }
}

void save_braitenberg(const std::filesystem::path& path, const BraitenbergWeights& w) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write weights: " + path.string());
  nlohmann::json doc;
  doc["left"] = grid_json(w.left);
  doc["right"] = grid_json(w.right);
  out << doc.dump(2) << '\n';
}

BraitenbergController::BraitenbergController(const RStdpConfig& config, const BraitenbergWeights& w,
                                             std::uint64_t seed)
    : RStdpController(config, w.left, w.right, seed) {
  kind_ = "braitenberg";
}

}  // namespace lanekeep
