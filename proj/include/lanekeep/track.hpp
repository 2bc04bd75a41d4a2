#pragma once

#include <cstddef>
#include <string_view>
#include <variant>
#include <vector>

#include "lanekeep/geometry.hpp"

namespace lanekeep {

enum class TurnDirection { left, right };

/// The two lanes of the road. The outer lane is driven counter-clockwise
/// (A, B, ..., F); the inner lane is driven in the opposite direction.
enum class Lane { inner, outer };

Lane opposite(Lane lane);
std::string_view to_string(Lane lane);

/// Which lines are painted on a segment. "left" and "right" are taken in the
/// outer lane's travel direction, so left_solid is the inner road boundary.
struct MarkingPattern {
  bool left_solid = true;
  bool center_dashed = true;
  bool right_solid = true;

  friend bool operator==(const MarkingPattern&, const MarkingPattern&) = default;
};

struct StraightShape {
  double length{};

  friend bool operator==(const StraightShape&, const StraightShape&) = default;
};

/// Circular arc. Radii are lane-centerline radii; the road middle sits halfway.
struct ArcShape {
  double sweep{};  // rad, > 0
  TurnDirection direction{TurnDirection::left};
  double inner_radius{};
  double outer_radius{};
  int radius_set{};

  double middle_radius() const { return 0.5 * (inner_radius + outer_radius); }

  friend bool operator==(const ArcShape&, const ArcShape&) = default;
};

struct Segment {
  char label{};
  std::variant<StraightShape, ArcShape> shape;
  MarkingPattern markings;

  friend bool operator==(const Segment&, const Segment&) = default;
};

struct TrackSpec {
  int scenario_id{1};
  double lane_separation{0.5};
  double marking_offset{0.25};
  double marking_width{0.02};
  double dash_length{0.5};
  double dash_gap{0.5};
  std::vector<Segment> segments;

  /// Throws ConfigError on inconsistent radii, open centerline, bad marking geometry.
  void validate() const;

  friend bool operator==(const TrackSpec&, const TrackSpec&) = default;
};

struct ClosureResidual {
  double position{};
  double heading{};
};

/// Distance between the end of the last segment and the start of the first.
ClosureResidual closure_residual(const TrackSpec& spec);

/// Scenario 1: full markings. 2: center line only. 3: pattern 1 on A-C, pattern 2 on D-F.
TrackSpec build_scenario(int scenario_id);

struct RobotState {
  double x{};
  double y{};
  double heading{};  // (-pi, pi]
  double v_left{};   // wheel contact speed, m/s
  double v_right{};

  Vec2 position() const { return {x, y}; }
};

struct LanePose {
  double s{};  // arc length along the active lane, [0, lap length)
  double d{};  // signed offset, positive = right of center in travel direction
  char section{};
};

enum class TerminalReason { none, off_center, step_limit, lap_complete };

std::string_view to_string(TerminalReason reason);

/// active_lane is the lane of the current (or most recent) episode. A fresh
/// state reports inner so that the first reset starts on the outer lane.
struct EpisodeState {
  Lane active_lane{Lane::inner};
  int step_count{0};
  int episode_index{-1};
  TerminalReason terminal_reason{TerminalReason::none};
};

/// One primitive of a centerline: straight (curvature 0) or constant-curvature arc.
struct PathPiece {
  Vec2 start;
  double heading{};
  double length{};
  double curvature{};  // signed, positive turns left
  char section{};
  double s_start{};

  Vec2 point_at(double u) const;
  double heading_at(double u) const;
  Vec2 end() const { return point_at(length); }
  double end_heading() const { return heading_at(length); }
};

struct PathProjection {
  double s{};
  double lateral_left{};
  double distance{};
  char section{};
};

/// Closed chain of pieces with arc-length parameterization.
class LanePath {
public:
  LanePath() = default;
  explicit LanePath(std::vector<PathPiece> pieces);

  double length() const { return length_; }
  const std::vector<PathPiece>& pieces() const { return pieces_; }

  Vec2 point_at(double s) const;
  double heading_at(double s) const;
  char section_at(double s) const;
  PathProjection project(Vec2 p) const;

private:
  const PathPiece& piece_for(double& s) const;

  std::vector<PathPiece> pieces_;
  double length_{0.0};
};

/// A TrackSpec compiled into road-middle and lane centerlines.
class Course {
public:
  explicit Course(TrackSpec spec);

  const TrackSpec& spec() const { return spec_; }
  const LanePath& middle() const { return middle_; }
  const LanePath& lane(Lane lane) const { return lane == Lane::outer ? outer_ : inner_; }
  double lap_length(Lane lane) const { return this->lane(lane).length(); }

  /// Start marker S of a lane, heading along the travel direction, at rest.
  RobotState start_pose(Lane lane) const;

  /// True if a ground point lies on a painted stroke.
  bool marking_at(Vec2 p) const;

private:
  struct StrokePiece {
    PathPiece piece;
    Vec2 center;  // arcs only
    double radius{};
    double start_angle{};
    MarkingPattern markings;
  };

  TrackSpec spec_;
  LanePath middle_;
  LanePath outer_;
  LanePath inner_;
  std::vector<StrokePiece> strokes_;
  double boundary_offset_{};
  double half_width_{};
  double dash_period_{};
};

inline constexpr double kMaxLocalizationDistance = 2.0;
inline constexpr double kAxleWidth = 0.33;

/// Throws LocalizationError when the position is more than 2 m from the lane.
LanePose localize(const Course& course, Lane lane, Vec2 position);

/// Exact unicycle arc integration; straight motion is drift-free.
RobotState step_kinematics(const RobotState& state, double v_left, double v_right, double dt,
                           double axle_width = kAxleWidth);

struct Termination {
  bool terminal{false};
  TerminalReason reason{TerminalReason::none};
};

Termination check_termination(const LanePose& pose, const EpisodeState& episode,
                              double reset_distance, int max_steps);

/// Switches to the other lane, zeroes the step count and returns the start pose.
RobotState reset_episode(const Course& course, EpisodeState& episode);

}  // namespace lanekeep
