#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "crowdnav/env.hpp"
#include "crowdnav/mpc.hpp"

namespace crowdnav {

class LineChannel;

struct PlannerDecision {
  Action action;
  bool infeasible = false;
};

class Planner {
 public:
  virtual ~Planner() = default;
  virtual PlannerDecision act(const JointObservation& obs) = 0;
  virtual void reset() {}
  virtual std::string name() const = 0;
};

using PlannerFactory = std::function<std::unique_ptr<Planner>()>;

MpcProblem make_mpc_problem(const JointObservation& obs, MpcVariant variant,
                            const MpcWeights& weights, const Config& cfg);

/// Receding-horizon policy: solves from the observation and returns the first
/// action. The full solution is written to `solution` when given.
Action mpc_policy(const JointObservation& obs, MpcVariant variant, const MpcWeights& weights,
                  const Config& cfg, MpcSolution* solution = nullptr);

class MpcPlanner final : public Planner {
 public:
  MpcPlanner(MpcVariant variant, Config cfg);
  PlannerDecision act(const JointObservation& obs) override;
  void reset() override { previous_.reset(); }
  std::string name() const override;
  const std::optional<MpcSolution>& last_solution() const { return previous_; }

 private:
  MpcVariant variant_;
  Config cfg_;
  std::optional<MpcSolution> previous_;
};

// Fixed-rule policies used for smoke tests and protocol checks.
//   straight  full throttle, no steering
//   stop      zero action
//   goal      preferred speed, steer toward the goal at the rate limit
//   const:<v>,<dtheta>
class ScriptedPlanner final : public Planner {
 public:
  ScriptedPlanner(std::string mode, Config cfg);
  PlannerDecision act(const JointObservation& obs) override;
  std::string name() const override { return "scripted:" + mode_; }

 private:
  std::string mode_;
  Config cfg_;
  Action constant_;
};

// Asks another process for actions: {type:"act", observation} ->
// {type:"action", v, dtheta}.
class ExternalPlanner final : public Planner {
 public:
  ExternalPlanner(std::string endpoint, std::chrono::milliseconds timeout);
  ~ExternalPlanner() override;
  PlannerDecision act(const JointObservation& obs) override;
  std::string name() const override { return "external:" + endpoint_; }

 private:
  std::string endpoint_;
  std::unique_ptr<LineChannel> channel_;
  std::chrono::milliseconds timeout_;
};

/// mpc_ed_hard | mpc_ed_soft | mpc_md | scripted[:mode] | external:<endpoint>
PlannerFactory make_planner_factory(const std::string& spec, const Config& cfg);

}  // namespace crowdnav
