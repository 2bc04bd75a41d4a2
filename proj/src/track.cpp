#include "lanekeep/track.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lanekeep/errors.hpp"

namespace lanekeep {

namespace {

constexpr double kStraightCurvature = 1e-12;

bool is_straight(double curvature) { return std::abs(curvature) < kStraightCurvature; }

PathPiece offset_piece(const PathPiece& p, double offset_left) {
  PathPiece out = p;
  out.start = p.start + offset_left * left_normal(p.heading);
  const double scale = 1.0 - p.curvature * offset_left;
  out.curvature = p.curvature / scale;
  out.length = p.length * scale;
  return out;
}

PathPiece reversed_piece(const PathPiece& p) {
  PathPiece out = p;
  out.start = p.end();
  out.heading = wrap_angle(p.end_heading() + kPi);
  out.curvature = -p.curvature;
  return out;
}

std::vector<PathPiece> chain(std::vector<PathPiece> pieces) {
  double s = 0.0;
  for (auto& p : pieces) {
    p.s_start = s;
    s += p.length;
  }
  return pieces;
}

std::vector<PathPiece> middle_pieces(const TrackSpec& spec) {
  std::vector<PathPiece> pieces;
  Vec2 at{0.0, 0.0};
  double heading = 0.0;
  for (const auto& seg : spec.segments) {
    PathPiece p;
    p.start = at;
    p.heading = heading;
    p.section = seg.label;
    if (const auto* straight = std::get_if<StraightShape>(&seg.shape)) {
      p.length = straight->length;
      p.curvature = 0.0;
    } else {
      const auto& arc = std::get<ArcShape>(seg.shape);
      const double r = arc.middle_radius();
      p.length = arc.sweep * r;
      p.curvature = (arc.direction == TurnDirection::left ? 1.0 : -1.0) / r;
    }
    at = p.end();
    heading = p.end_heading();
    pieces.push_back(p);
  }
  return chain(std::move(pieces));
}

struct PieceProjection {
  double u{};
  double lateral_left{};
  double distance{};
};

PieceProjection project_onto(const PathPiece& piece, Vec2 p) {
  PieceProjection out;
  if (is_straight(piece.curvature)) {
    const Vec2 t = unit(piece.heading);
    const Vec2 q = p - piece.start;
    const double u = dot(q, t);
    if (u >= 0.0 && u <= piece.length) {
      out.u = u;
      out.lateral_left = cross(t, q);
      out.distance = std::abs(out.lateral_left);
      return out;
    }
  } else {
    const double sgn = piece.curvature > 0.0 ? 1.0 : -1.0;
    const double radius = 1.0 / std::abs(piece.curvature);
    const Vec2 center = piece.start + (1.0 / piece.curvature) * left_normal(piece.heading);
    const Vec2 q = p - center;
    const Vec2 q0 = piece.start - center;
    const double sweep = piece.length / radius;
    double delta = sgn * (std::atan2(q.y, q.x) - std::atan2(q0.y, q0.x));
    delta = 0.5 * sweep + wrap_angle(delta - 0.5 * sweep);
    if (delta >= 0.0 && delta <= sweep) {
      const double r = norm(q);
      out.u = delta * radius;
      out.lateral_left = sgn * (radius - r);
      out.distance = std::abs(radius - r);
      return out;
    }
  }
  // Beyond either end: measure against the nearer endpoint.
  const double d0 = norm(p - piece.start);
  const double d1 = norm(p - piece.end());
  out.u = d0 <= d1 ? 0.0 : piece.length;
  const Vec2 anchor = piece.point_at(out.u);
  out.lateral_left = cross(unit(piece.heading_at(out.u)), p - anchor);
  out.distance = std::min(d0, d1);
  return out;
}

}  // namespace

Lane opposite(Lane lane) { return lane == Lane::outer ? Lane::inner : Lane::outer; }

std::string_view to_string(Lane lane) { return lane == Lane::outer ? "outer" : "inner"; }

std::string_view to_string(TerminalReason reason) {
  switch (reason) {
    case TerminalReason::none: return "none";
    case TerminalReason::off_center: return "off_center";
    case TerminalReason::step_limit: return "step_limit";
    case TerminalReason::lap_complete: return "lap_complete";
  }
  return "unknown";
}

Vec2 PathPiece::point_at(double u) const {
  if (is_straight(curvature)) return start + u * unit(heading);
  const double h1 = heading + curvature * u;
  return start + (1.0 / curvature) * Vec2{std::sin(h1) - std::sin(heading),
                                          std::cos(heading) - std::cos(h1)};
}

double PathPiece::heading_at(double u) const { return wrap_angle(heading + curvature * u); }

LanePath::LanePath(std::vector<PathPiece> pieces) : pieces_(chain(std::move(pieces))) {
  length_ = pieces_.empty() ? 0.0 : pieces_.back().s_start + pieces_.back().length;
}

const PathPiece& LanePath::piece_for(double& s) const {
  s = std::fmod(s, length_);
  if (s < 0.0) s += length_;
  for (const auto& p : pieces_) {
    if (s < p.s_start + p.length) {
      s -= p.s_start;
      return p;
    }
  }
  s = pieces_.back().length;
  return pieces_.back();
}

Vec2 LanePath::point_at(double s) const {
  const auto& p = piece_for(s);
  return p.point_at(s);
}

double LanePath::heading_at(double s) const {
  const auto& p = piece_for(s);
  return p.heading_at(s);
}

char LanePath::section_at(double s) const { return piece_for(s).section; }

PathProjection LanePath::project(Vec2 p) const {
  PathProjection best;
  best.distance = std::numeric_limits<double>::infinity();
  for (const auto& piece : pieces_) {
    const auto proj = project_onto(piece, p);
    if (proj.distance < best.distance) {
      best.distance = proj.distance;
      best.lateral_left = proj.lateral_left;
      best.section = piece.section;
      best.s = piece.s_start + proj.u;
    }
  }
  if (best.s >= length_) best.s -= length_;
  return best;
}

ClosureResidual closure_residual(const TrackSpec& spec) {
  if (spec.segments.empty()) return {};
  const auto pieces = middle_pieces(spec);
  const auto& first = pieces.front();
  const auto& last = pieces.back();
  return {norm(last.end() - first.start), std::abs(wrap_angle(last.end_heading() - first.heading))};
}

void TrackSpec::validate() const {
  auto fail = [this](const std::string& msg) {
    std::ostringstream os;
    os << "scenario " << scenario_id << ": " << msg;
    throw ConfigError(os.str());
  };
  if (segments.empty()) fail("no segments");
  if (!(lane_separation > 0.0)) fail("lane_separation must be positive");
  if (std::abs(2.0 * marking_offset - lane_separation) > 1e-12)
    fail("marking_offset must be half the lane separation (shared center line)");
  if (!(marking_width > 0.0) || marking_width >= marking_offset) fail("bad marking_width");
  if (!(dash_length > 0.0) || dash_gap < 0.0) fail("bad dash geometry");
  for (const auto& seg : segments) {
    if (const auto* s = std::get_if<StraightShape>(&seg.shape)) {
      if (!(s->length > 0.0)) fail(std::string("segment ") + seg.label + ": length must be positive");
      continue;
    }
    const auto& arc = std::get<ArcShape>(seg.shape);
    if (!(arc.sweep > 0.0)) fail(std::string("segment ") + seg.label + ": sweep must be positive");
    if (std::abs(std::abs(arc.outer_radius - arc.inner_radius) - lane_separation) > 1e-9)
      fail(std::string("segment ") + seg.label + ": lane radii must differ by lane_separation");
    const bool outer_wider = arc.outer_radius > arc.inner_radius;
    if (outer_wider != (arc.direction == TurnDirection::left))
      fail(std::string("segment ") + seg.label +
           ": outer lane must be on the outside of left turns and the inside of right turns");
    if (std::min(arc.inner_radius, arc.outer_radius) - marking_offset <= 0.0)
      fail(std::string("segment ") + seg.label + ": radius too small for the road width");
  }
  const auto residual = closure_residual(*this);
  if (residual.position > 1e-6 || residual.heading > 1e-6) {
    std::ostringstream os;
    os << "centerline does not close (gap " << residual.position << " m, " << residual.heading
       << " rad)";
    fail(os.str());
  }
}

TrackSpec build_scenario(int scenario_id) {
  if (scenario_id < 1 || scenario_id > 3) {
    throw ConfigError("unknown scenario id " + std::to_string(scenario_id));
  }
  constexpr MarkingPattern full{true, true, true};
  constexpr MarkingPattern center_only{false, true, false};

  auto arc = [](double sweep_deg, TurnDirection dir, int set) {
    ArcShape a;
    a.sweep = deg2rad(sweep_deg);
    a.direction = dir;
    a.radius_set = set;
    if (set == 1) {
      a.inner_radius = 1.75;
      a.outer_radius = 2.25;
    } else {
      a.inner_radius = 3.25;
      a.outer_radius = 2.75;
    }
    return a;
  };

  TrackSpec spec;
  spec.scenario_id = scenario_id;
  spec.segments = {
      {'A', StraightShape{5.0}, full},
      {'B', arc(90.0, TurnDirection::left, 1), full},
      {'C', StraightShape{5.0}, full},
      {'D', arc(180.0, TurnDirection::left, 1), full},
      {'E', arc(90.0, TurnDirection::right, 2), full},
      {'F', arc(180.0, TurnDirection::left, 1), full},
  };
  for (auto& seg : spec.segments) {
    const bool second_half = seg.label >= 'D';
    if (scenario_id == 2 || (scenario_id == 3 && second_half)) seg.markings = center_only;
  }
  spec.validate();
  return spec;
}

Course::Course(TrackSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  const auto middle = middle_pieces(spec_);
  middle_ = LanePath(middle);

  const double half = 0.5 * spec_.lane_separation;
  std::vector<PathPiece> outer;
  for (const auto& p : middle) outer.push_back(offset_piece(p, -half));
  outer_ = LanePath(std::move(outer));

  // Inner lane runs backwards, starting at the far end of the first segment.
  std::vector<PathPiece> inner;
  inner.push_back(reversed_piece(offset_piece(middle.front(), half)));
  for (std::size_t i = middle.size() - 1; i >= 1; --i) {
    inner.push_back(reversed_piece(offset_piece(middle[i], half)));
  }
  inner_ = LanePath(std::move(inner));

  for (std::size_t i = 0; i < middle.size(); ++i) {
    StrokePiece sp;
    sp.piece = middle[i];
    sp.markings = spec_.segments[i].markings;
    if (!is_straight(sp.piece.curvature)) {
      sp.center = sp.piece.start + (1.0 / sp.piece.curvature) * left_normal(sp.piece.heading);
      sp.radius = 1.0 / std::abs(sp.piece.curvature);
      const Vec2 q0 = sp.piece.start - sp.center;
      sp.start_angle = std::atan2(q0.y, q0.x);
    }
    strokes_.push_back(sp);
  }
  boundary_offset_ = half + spec_.marking_offset;
  half_width_ = 0.5 * spec_.marking_width;
  dash_period_ = spec_.dash_length + spec_.dash_gap;
}

RobotState Course::start_pose(Lane which) const {
  const auto& first = lane(which).pieces().front();
  RobotState st;
  st.x = first.start.x;
  st.y = first.start.y;
  st.heading = wrap_angle(first.heading);
  return st;
}

bool Course::marking_at(Vec2 p) const {
  const double reach = boundary_offset_ + half_width_;
  for (const auto& sp : strokes_) {
    const auto& piece = sp.piece;
    double u = 0.0;
    double o = 0.0;
    if (is_straight(piece.curvature)) {
      const Vec2 t = unit(piece.heading);
      const Vec2 q = p - piece.start;
      o = cross(t, q);
      if (std::abs(o) > reach) continue;
      u = dot(q, t);
      if (u < 0.0 || u > piece.length) continue;
    } else {
      const double sgn = piece.curvature > 0.0 ? 1.0 : -1.0;
      const Vec2 q = p - sp.center;
      o = sgn * (sp.radius - norm(q));
      if (std::abs(o) > reach) continue;
      double delta = std::fmod(sgn * (std::atan2(q.y, q.x) - sp.start_angle) + 4.0 * kPi, 2.0 * kPi);
      u = delta * sp.radius;
      if (u > piece.length) continue;
    }
    if (sp.markings.right_solid && std::abs(o + boundary_offset_) <= half_width_) return true;
    if (sp.markings.left_solid && std::abs(o - boundary_offset_) <= half_width_) return true;
    if (sp.markings.center_dashed && std::abs(o) <= half_width_) {
      if (std::fmod(piece.s_start + u, dash_period_) < spec_.dash_length) return true;
    }
  }
  return false;
}

LanePose localize(const Course& course, Lane lane, Vec2 position) {
  const auto proj = course.lane(lane).project(position);
  if (proj.distance > kMaxLocalizationDistance) {
    std::ostringstream os;
    os << "position (" << position.x << ", " << position.y << ") is " << proj.distance
       << " m from the " << to_string(lane) << " lane";
    throw LocalizationError(os.str());
  }
  return {proj.s, -proj.lateral_left, proj.section};
}

RobotState step_kinematics(const RobotState& state, double v_left, double v_right, double dt,
                           double axle_width) {
  if (!(dt > 0.0) || !std::isfinite(v_left) || !std::isfinite(v_right) || !(axle_width > 0.0)) {
    throw ContractError("step_kinematics: dt and axle width must be positive, speeds finite");
  }
  const double v = 0.5 * (v_left + v_right);
  const double omega = (v_right - v_left) / axle_width;
  const double half_turn = 0.5 * omega * dt;
  // Chord of the traversed arc, along the mid-step heading.
  const double sinc = half_turn == 0.0 ? 1.0 : std::sin(half_turn) / half_turn;
  const double chord = v * dt * sinc;
  const double mid = state.heading + half_turn;
  RobotState out = state;
  out.x += chord * std::cos(mid);
  out.y += chord * std::sin(mid);
  out.heading = wrap_angle(state.heading + omega * dt);
  out.v_left = v_left;
  out.v_right = v_right;
  return out;
}

Termination check_termination(const LanePose& pose, const EpisodeState& episode,
                              double reset_distance, int max_steps) {
  if (!(reset_distance > 0.0)) throw ContractError("reset_distance must be positive");
  if (std::abs(pose.d) > reset_distance) return {true, TerminalReason::off_center};
  if (episode.step_count >= max_steps) return {true, TerminalReason::step_limit};
  return {};
}

RobotState reset_episode(const Course& course, EpisodeState& episode) {
  episode.active_lane = opposite(episode.active_lane);
  episode.step_count = 0;
  episode.episode_index += 1;
  episode.terminal_reason = TerminalReason::none;
  return course.start_pose(episode.active_lane);
}

}  // namespace lanekeep
