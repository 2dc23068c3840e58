#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crowdnav/core.hpp"
#include "crowdnav/uncertainty.hpp"

namespace crowdnav {

// Collision-avoidance constraint families:
//   ed_hard  Euclidean keep-out of r_ped + r_av + PS around predicted means
//   ed_soft  same with a bounded slack, never below r_ped + r_av
//   md_hard  minimum Mahalanobis distance derived from the collision threshold
enum class MpcVariant { ed_hard, ed_soft, md_hard };

const char* to_string(MpcVariant variant);
MpcVariant mpc_variant_from_string(const std::string& name);

struct MpcProblem {
  VehicleState av;
  std::vector<Vec2> current_peds;       // positions at k = 0
  std::vector<PredictedTrack> tracks;   // k = 1..K
  MpcVariant variant = MpcVariant::ed_hard;
  int horizon = 6;
  MpcWeights weights;
  CemSettings cem;
  Config cfg;
  std::optional<std::vector<Action>> warm_start;
};

struct SolverStats {
  int iterations = 0;
  int samples = 0;
  double wall_time_s = 0.0;
  // Mean cost of the elite set after each iteration; +inf while an elite is
  // infeasible under a hard variant.
  std::vector<double> elite_mean_costs;
};

struct MpcSolution {
  std::vector<Action> actions;
  std::vector<Vec2> planned_positions;
  double cost = 0.0;
  bool feasible = false;
  double slack_used = 0.0;
  double worst_violation = 0.0;
  SolverStats stats;
};

struct ConstraintCheck {
  bool feasible = true;
  double worst_violation = 0.0;
  double slack_used = 0.0;            // ed_soft only
  std::vector<double> stage_slack;    // per planned point, ed_soft only
};

inline constexpr double kFeasibilityTolerance = 1e-9;
inline constexpr double kMinPedestrianDistance = 1e-6;

/// J_a + J_p + J_ED for one stage. `slack` is the soft variant's slack
/// entering the control cost.
double stage_cost(const Action& action, const Vec2& position, std::span<const Vec2> ped_positions,
                  const MpcWeights& weights, const Vec2& goal, const Vec2& start,
                  double slack = 0.0);

/// Q_p * (|p_K - goal| / |start - goal|)^2. Throws when start == goal.
double terminal_cost(const Vec2& position_k, const Vec2& goal, const Vec2& start, double q_p);

/// Squared Mahalanobis radius at which the collision estimate equals delta:
///   -2 ln( sqrt(det(2 pi Sigma)) * delta / V_s ).
double md_threshold(const Gaussian2D& g, double combined_radius, double delta);

ConstraintCheck check_constraints(std::span<const Vec2> planned_positions,
                                  std::span<const PredictedTrack> tracks, MpcVariant variant,
                                  const Config& cfg, double slack_bound);

/// Rolls actions through the unicycle model and returns the K positions.
std::vector<Vec2> rollout_positions(const VehicleState& start, std::span<const Action> actions,
                                    double dt);

/// Cross-entropy sampling over the K-step action box. Deterministic for a
/// given problem and seed. Returns the cheapest feasible plan, or the least
/// violating one with feasible = false.
MpcSolution solve(const MpcProblem& problem);

}  // namespace crowdnav
