#include "lanekeep/training_log.hpp"

namespace lanekeep {

std::string_view to_string(TrainingEventKind kind) {
  switch (kind) {
    case TrainingEventKind::lap_complete: return "lap";
    case TrainingEventKind::failure: return "failure";
    case TrainingEventKind::truncated: return "truncated";
  }
  return "?";
}

TrainingTimes training_time_report(std::span<const TrainingEvent> events, int streak) {
  TrainingTimes out;
  int run = 0;
  bool seen_inner = false;
  bool seen_outer = false;
  for (const auto& e : events) {
    if (e.kind == TrainingEventKind::failure) {
      run = 0;
      seen_inner = seen_outer = false;
      continue;
    }
    if (e.kind != TrainingEventKind::lap_complete) continue;
    if (!out.first_lap) out.first_lap = e.world_step;
    ++run;
    (e.lane == Lane::inner ? seen_inner : seen_outer) = true;
    if (!out.stable && run >= streak && seen_inner && seen_outer) out.stable = e.world_step;
  }
  return out;
}

}  // namespace lanekeep
