#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Core>

#include "crowdnav/config.hpp"

namespace crowdnav {

using Vec2 = Eigen::Vector2d;
using AgentId = std::int64_t;

inline constexpr double kPi = 3.14159265358979323846;

// Ego vehicle state: position, velocity, heading, footprint radius, preferred
// speed and goal. Heading is kept in (-pi, pi].
struct VehicleState {
  Vec2 position = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();
  double theta = 0.0;
  double radius = 1.0;
  double v_pref = 1.0;
  Vec2 goal = Vec2::Zero();

  double speed() const { return velocity.norm(); }
};

struct PedestrianState {
  AgentId id = 0;
  Vec2 position = Vec2::Zero();
  double radius = 0.3;
};

// Unicycle command: signed speed and the heading change applied over one step.
struct Action {
  double v = 0.0;
  double dtheta = 0.0;

  friend bool operator==(const Action&, const Action&) = default;
};

/// Wraps an angle into (-pi, pi].
double wrap_angle(double angle);

/// Rotate-then-translate unicycle update. The new heading is applied before
/// the displacement, so the resulting velocity has magnitude |v|.
VehicleState unicycle_step(const VehicleState& state, const Action& action, double dt);

/// Surface-to-surface distance to the closest pedestrian (negative when
/// overlapping). Returns +infinity for an empty list.
double min_separation(const VehicleState& av, std::span<const PedestrianState> peds);

/// Clips speed into [v_min, v_max] and the heading change into
/// +-dtheta_rate_max * dt. Throws InvalidAction on NaN input.
Action clamp_action(const Action& raw, const Config& cfg);

}  // namespace crowdnav
