#pragma once

#include <filesystem>
#include <string>

#include "lanekeep/track.hpp"

namespace lanekeep {

/// Scenario documents are JSON ("lanekeep-scenario/1"). Arcs reference a named
/// radius set so the section-to-radius mapping can be edited without code changes.
std::string scenario_to_text(const TrackSpec& spec);
TrackSpec scenario_from_text(const std::string& text);

TrackSpec load_scenario(const std::filesystem::path& path);
void save_scenario(const TrackSpec& spec, const std::filesystem::path& path);

}  // namespace lanekeep
