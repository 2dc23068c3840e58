#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crowdnav/core.hpp"

namespace crowdnav {

// One replayed episode: pedestrian positions per frame plus the recorded ego
// trajectory whose first and last points are the start and goal.
struct Scenario {
  std::string id;
  double fps = 2.0;
  // ped_frames[f] holds the pedestrians present at frame f, sorted by id.
  std::vector<std::vector<PedestrianState>> ped_frames;
  std::vector<Vec2> ego_reference;
  double time_budget = 0.0;

  std::size_t frame_count() const { return ego_reference.size(); }
  double reference_duration() const;

  /// Pedestrians at an arbitrary time. Between frames only agents present in
  /// both neighbouring frames are returned, linearly interpolated.
  std::vector<PedestrianState> pedestrians_at(double time) const;
  std::optional<Vec2> pedestrian_position(AgentId id, double time) const;

  /// Throws InvalidArgument on a malformed scenario.
  void validate() const;
};

}  // namespace crowdnav
