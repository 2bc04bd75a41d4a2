#include "lanekeep/world.hpp"

namespace lanekeep {

LaneWorld::LaneWorld(TrackSpec spec, WorldConfig config)
    : course_(std::move(spec)), config_(config), renderer_(config.camera) {
  place(Lane::outer);
}

void LaneWorld::begin_episode(const RobotState& start) {
  robot_ = start;
  pose_ = localize(course_, episode_.active_lane, robot_.position());
  progress_ = 0.0;
  last_frame_ = dvs_.observe(renderer_.render(course_, robot_), t_);
}

void LaneWorld::reset() { begin_episode(reset_episode(course_, episode_)); }

void LaneWorld::place(Lane lane) {
  episode_.active_lane = opposite(lane);
  dvs_.reset();
  reset();
}

WorldStep LaneWorld::step(double v_left, double v_right) {
  robot_ = step_kinematics(robot_, v_left, v_right, config_.dt, config_.axle_width);
  ++t_;
  WorldStep out;
  out.frame = dvs_.observe(renderer_.render(course_, robot_), t_);
  last_frame_ = out.frame;
  const double lap = course_.lap_length(episode_.active_lane);
  const double last_s = pose_.s;
  pose_ = localize(course_, episode_.active_lane, robot_.position());
  double ds = pose_.s - last_s;
  if (ds > 0.5 * lap) ds -= lap;
  if (ds < -0.5 * lap) ds += lap;
  progress_ += ds;
  out.pose = pose_;
  out.lap_complete = progress_ >= lap;
  return out;
}

}  // namespace lanekeep
