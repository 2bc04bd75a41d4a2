#pragma once

#include "lanekeep/dvs.hpp"
#include "lanekeep/track.hpp"

namespace lanekeep {

struct WorldConfig {
  double dt{0.05};  // s; world and camera step
  double axle_width{kAxleWidth};
  CameraModel camera;
};

struct WorldStep {
  EventFrame frame;
  LanePose pose;
  bool lap_complete{false};
};

/// Course + robot + event camera, stepped at a fixed 50 ms.
class LaneWorld {
public:
  explicit LaneWorld(TrackSpec spec, WorldConfig config = {});

  const Course& course() const { return course_; }
  const WorldConfig& config() const { return config_; }
  const RobotState& robot() const { return robot_; }
  const EpisodeState& episode() const { return episode_; }
  EpisodeState& episode() { return episode_; }
  const LanePose& pose() const { return pose_; }
  long time_step() const { return t_; }
  /// Arc length driven along the active lane since the last reset (negative when reversing).
  double progress() const { return progress_; }

  /// Events seen since the previous step; after a reset or placement, the events of
  /// the jump to the start pose.
  const EventFrame& last_frame() const { return last_frame_; }

  /// Starts the next episode on the other lane. The camera sees the teleport.
  void reset();
  /// Starts an episode on a given lane with a freshly started camera (blank baseline),
  /// so the first frame shows every visible marking.
  void place(Lane lane);

  WorldStep step(double v_left, double v_right);

private:
  void begin_episode(const RobotState& start);

  Course course_;
  WorldConfig config_;
  ViewRenderer renderer_;
  DvsEmulator dvs_;
  RobotState robot_;
  EpisodeState episode_;
  LanePose pose_;
  EventFrame last_frame_;
  double progress_{0.0};
  long t_{0};
};

}  // namespace lanekeep
