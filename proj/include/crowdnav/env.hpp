#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "crowdnav/core.hpp"
#include "crowdnav/predictor.hpp"
#include "crowdnav/scenario.hpp"
#include "crowdnav/uncertainty.hpp"

namespace crowdnav {

enum class TerminalKind { running, goal, collision, timeout };

const char* to_string(TerminalKind kind);
TerminalKind terminal_kind_from_string(const std::string& name);

struct ObservedPedestrian {
  AgentId id = 0;
  Vec2 position = Vec2::Zero();
  PredictedTrack track;
};

// Joint state handed to policies: ego state plus every pedestrian within
// sensor range with its K-step predicted Gaussians.
struct JointObservation {
  int t = 0;
  VehicleState av;
  std::vector<ObservedPedestrian> peds;
};

enum class RewardBranch { goal, collision, danger, regular };

struct RewardBreakdown {
  RewardBranch branch = RewardBranch::regular;
  double r_progress = 0.0;
  double r_pred = 0.0;
  double r_action = 0.0;
  double r_danger = 0.0;
  bool danger = false;
  double d_min = 0.0;
};

struct RewardResult {
  double reward = 0.0;
  RewardBreakdown breakdown;
};

struct StepOutcome {
  JointObservation obs;
  double reward = 0.0;
  bool done = false;
  TerminalKind terminal_kind = TerminalKind::running;
  RewardBreakdown info;
};

struct StepLog {
  int t = 0;
  VehicleState av;  // state after the step
  Action action;    // clamped action that was applied
  double reward = 0.0;
  double d_min = 0.0;
  bool intrusion = false;
  bool infeasible = false;
  double planner_time_s = 0.0;
};

struct EpisodeRecord {
  std::string scenario_id;
  std::vector<StepLog> steps;
  TerminalKind terminal_kind = TerminalKind::running;
  double path_length = 0.0;
  double nav_time = 0.0;
  std::string error;
};

/// Prediction penalty: for each pedestrian the earliest step k whose
/// collision probability exceeds delta contributes r_c / 2^k; the most
/// negative pedestrian term is returned (0 when nothing fires).
double prediction_penalty(const Vec2& p_av, std::span<const PredictedTrack> tracks,
                          const Config& cfg);

double danger_penalty(double d_min, double speed, const Config& cfg);

/// Branches in order: goal, collision (d_min < 0), danger (d_min < PS), then
/// progress + prediction + action terms.
RewardResult compute_reward(const VehicleState& prev, const VehicleState& cur,
                            const Action& action, std::span<const PedestrianState> peds,
                            std::span<const PredictedTrack> tracks, const Config& cfg);

struct ObservationContext {
  int t = 0;
  double time = 0.0;
  const Scenario* scenario = nullptr;           // source of pedestrian histories
  std::span<const VehicleState> av_history;     // oldest first
  Action last_action;
};

/// Filters by sensor range, assembles histories and the AV projection, and
/// attaches validated predictions.
JointObservation build_observation(const VehicleState& av,
                                   std::span<const PedestrianState> frame_peds,
                                   Predictor& predictor, const Config& cfg,
                                   const ObservationContext& ctx);

struct StepAnnotation {
  double planner_time_s = 0.0;
  bool infeasible = false;
};

// Replay environment. Pedestrians follow the recording open loop; only the
// ego vehicle reacts to actions. Single-threaded per instance.
class Environment {
 public:
  Environment(Config cfg, std::unique_ptr<Predictor> predictor);

  const JointObservation& reset(std::shared_ptr<const Scenario> scenario);
  StepOutcome step(const Action& action, const StepAnnotation& note = {});

  bool done() const { return kind_ != TerminalKind::running; }
  TerminalKind terminal_kind() const { return kind_; }
  const JointObservation& observation() const { return obs_; }
  const EpisodeRecord& record() const { return record_; }
  const Config& config() const { return cfg_; }
  const Scenario& scenario() const;
  double elapsed() const { return steps_ * cfg_.dt; }

 private:
  JointObservation observe();

  Config cfg_;
  std::unique_ptr<Predictor> predictor_;
  std::shared_ptr<const Scenario> scenario_;
  VehicleState av_;
  std::vector<VehicleState> av_history_;
  Action last_action_;
  int steps_ = 0;
  TerminalKind kind_ = TerminalKind::running;
  JointObservation obs_;
  EpisodeRecord record_;
};

}  // namespace crowdnav
