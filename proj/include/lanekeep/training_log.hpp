#pragma once

#include <optional>
#include <span>
#include <string_view>

#include "lanekeep/track.hpp"

namespace lanekeep {

enum class TrainingEventKind {
  lap_complete,  // a full reset-free lap finished
  failure,       // off-center reset
  truncated,     // episode ended for a neutral reason (step limit, budget)
};

std::string_view to_string(TrainingEventKind kind);

struct TrainingEvent {
  long world_step{};
  TrainingEventKind kind{TrainingEventKind::lap_complete};
  Lane lane{Lane::outer};
  double s{};
  char section{};
};

struct TrainingTimes {
  std::optional<long> first_lap;  // world step of the first completed lap
  std::optional<long> stable;     // world step at which the stable streak completes
};

/// Stable = `streak` consecutive completed laps with no failure in between, covering
/// both lanes. Neutral truncations do not break a streak.
TrainingTimes training_time_report(std::span<const TrainingEvent> events, int streak = 5);

}  // namespace lanekeep
