#include "crowdnav/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "crowdnav/error.hpp"

namespace crowdnav {

double wrap_angle(double angle) {
  // remainder() lands in [-pi, pi]; -pi is folded onto pi.
  double wrapped = std::remainder(angle, 2.0 * kPi);
  if (wrapped <= -kPi) wrapped += 2.0 * kPi;
  return wrapped;
}

VehicleState unicycle_step(const VehicleState& state, const Action& action, double dt) {
  VehicleState next = state;
  next.theta = wrap_angle(state.theta + action.dtheta);
  const Vec2 heading(std::cos(next.theta), std::sin(next.theta));
  next.velocity = action.v * heading;
  next.position = state.position + dt * next.velocity;
  return next;
}

double min_separation(const VehicleState& av, std::span<const PedestrianState> peds) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& ped : peds) {
    best = std::min(best, (av.position - ped.position).norm() - av.radius - ped.radius);
  }
  return best;
}

Action clamp_action(const Action& raw, const Config& cfg) {
  if (std::isnan(raw.v) || std::isnan(raw.dtheta)) {
    throw InvalidAction("policy produced a NaN action component");
  }
  const double turn = cfg.dtheta_step_max();
  return {std::clamp(raw.v, cfg.v_min, cfg.v_max), std::clamp(raw.dtheta, -turn, turn)};
}

}  // namespace crowdnav
