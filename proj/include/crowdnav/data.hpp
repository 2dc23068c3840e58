#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "crowdnav/core.hpp"
#include "crowdnav/scenario.hpp"

namespace crowdnav {

enum class AgentType { pedestrian, vehicle };

struct TrajectoryRow {
  std::int64_t frame = 0;
  AgentId agent_id = 0;
  AgentType agent_type = AgentType::pedestrian;
  double x = 0.0;
  double y = 0.0;
};

struct RawTrajectoryTable {
  std::vector<TrajectoryRow> rows;
  double fps = 2.0;
};

struct SplitSpec {
  double train = 0.64;
  double test = 0.20;
  double val = 0.16;

  void validate() const;
};

struct ScenarioSplit {
  std::vector<Scenario> train;
  std::vector<Scenario> test;
  std::vector<Scenario> val;
};

struct DroppedVehicle {
  AgentId id = 0;
  std::string reason;
};

struct ExtractionResult {
  std::vector<Scenario> scenarios;
  std::vector<DroppedVehicle> dropped;
};

/// CSV with header columns frame, agent_id, agent_type, x, y (any order).
/// Errors name the offending line.
RawTrajectoryTable parse_table(const std::filesystem::path& path, double fps = 2.0);
RawTrajectoryTable parse_table_text(const std::string& text, double fps = 2.0);

/// One scenario per vehicle: start and goal are the vehicle's first and last
/// recorded positions, pedestrians are cropped to its frame interval, and the
/// time budget is the recorded duration plus the timeout margin. Vehicles with
/// fewer than cfg.min_frames samples are dropped.
ExtractionResult extract_scenarios(const RawTrajectoryTable& table, const Config& cfg);

/// Seeded shuffle, then largest-remainder partition into train/test/val.
ScenarioSplit split_scenarios(std::vector<Scenario> scenarios, const SplitSpec& spec,
                              std::uint64_t seed);

/// Partition sizes for n items under the largest-remainder rule.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitSpec& spec);

enum class SynthTemplate { crossing, head_on, static_crowd, dense_ring };

SynthTemplate synth_template_from_string(const std::string& name);
const char* to_string(SynthTemplate t);

struct SynthOptions {
  double length = 30.0;           // m, straight ego reference from (0,0) along +x
  double reference_speed = 2.5;   // m/s of the recorded ego drive
  double fps = 2.0;
  double ring_radius = 2.0;       // m, dense_ring only
};

/// Deterministic synthetic scenario:
///   crossing      pedestrians crossing the ego line near its midpoint, on
///                 gently curving paths timed to meet a full-speed vehicle
///   head_on       straight walkers approaching along the ego line
///   static_crowd  standing pedestrians scattered around the ego line
///   dense_ring    standing pedestrians on a circle around the start
Scenario synth_scenario(SynthTemplate kind, int n_peds, std::uint64_t seed, const Config& cfg,
                        const SynthOptions& options = {});

}  // namespace crowdnav
