#include "lanekeep/scenario_io.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "lanekeep/errors.hpp"

namespace lanekeep {

namespace {

constexpr const char* kFormat = "lanekeep-scenario/1";

using nlohmann::json;

json markings_json(const MarkingPattern& m) {
  return {{"left_solid", m.left_solid}, {"center_dashed", m.center_dashed},
          {"right_solid", m.right_solid}};
}

}  // namespace

std::string scenario_to_text(const TrackSpec& spec) {
  json doc;
  doc["format"] = kFormat;
  doc["scenario_id"] = spec.scenario_id;
  doc["lane_separation"] = spec.lane_separation;
  doc["marking_offset"] = spec.marking_offset;
  doc["marking_width"] = spec.marking_width;
  doc["dash_length"] = spec.dash_length;
  doc["dash_gap"] = spec.dash_gap;

  std::map<int, std::pair<double, double>> sets;
  json segs = json::array();
  for (const auto& seg : spec.segments) {
    json s;
    s["label"] = std::string(1, seg.label);
    if (const auto* st = std::get_if<StraightShape>(&seg.shape)) {
      s["type"] = "straight";
      s["length"] = st->length;
    } else {
      const auto& arc = std::get<ArcShape>(seg.shape);
      s["type"] = "arc";
      s["direction"] = arc.direction == TurnDirection::left ? "left" : "right";
      s["sweep_deg"] = arc.sweep * 180.0 / kPi;
      s["radius_set"] = std::to_string(arc.radius_set);
      sets[arc.radius_set] = {arc.inner_radius, arc.outer_radius};
    }
    s["markings"] = markings_json(seg.markings);
    segs.push_back(s);
  }
  json radius_sets = json::object();
  for (const auto& [id, radii] : sets) {
    radius_sets[std::to_string(id)] = {{"inner", radii.first}, {"outer", radii.second}};
  }
  doc["radius_sets"] = radius_sets;
  doc["segments"] = segs;
  return doc.dump(2) + "\n";
}

TrackSpec scenario_from_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  try {
    if (doc.value("format", std::string{}) != kFormat) {
      throw ConfigError("scenario: unsupported format tag");
    }
    TrackSpec spec;
    spec.scenario_id = doc.at("scenario_id").get<int>();
    spec.lane_separation = doc.value("lane_separation", spec.lane_separation);
    spec.marking_offset = doc.value("marking_offset", spec.marking_offset);
    spec.marking_width = doc.value("marking_width", spec.marking_width);
    spec.dash_length = doc.value("dash_length", spec.dash_length);
    spec.dash_gap = doc.value("dash_gap", spec.dash_gap);
    const auto& sets = doc.at("radius_sets");
    for (const auto& s : doc.at("segments")) {
      Segment seg;
      const auto label = s.at("label").get<std::string>();
      if (label.size() != 1) throw ConfigError("scenario: segment labels are single letters");
      seg.label = label[0];
      const auto type = s.at("type").get<std::string>();
      if (type == "straight") {
        seg.shape = StraightShape{s.at("length").get<double>()};
      } else if (type == "arc") {
        ArcShape arc;
        const auto dir = s.at("direction").get<std::string>();
        if (dir != "left" && dir != "right") throw ConfigError("scenario: bad arc direction " + dir);
        arc.direction = dir == "left" ? TurnDirection::left : TurnDirection::right;
        arc.sweep = s.at("sweep_deg").get<double>() * kPi / 180.0;
        const auto set_name = s.at("radius_set").get<std::string>();
        const auto& set = sets.at(set_name);
        arc.radius_set = std::stoi(set_name);
        arc.inner_radius = set.at("inner").get<double>();
        arc.outer_radius = set.at("outer").get<double>();
        seg.shape = arc;
      } else {
        throw ConfigError("scenario: unknown segment type " + type);
      }
      const auto& m = s.at("markings");
      seg.markings.left_solid = m.at("left_solid").get<bool>();
      seg.markings.center_dashed = m.at("center_dashed").get<bool>();
      seg.markings.right_solid = m.at("right_solid").get<bool>();
      spec.segments.push_back(seg);
    }
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
}

TrackSpec load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return scenario_from_text(ss.str());
}

void save_scenario(const TrackSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write scenario file " + path.string());
  out << scenario_to_text(spec);
}

}  // namespace lanekeep
