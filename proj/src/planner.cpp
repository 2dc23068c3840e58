#include "crowdnav/planner.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "crowdnav/error.hpp"
#include "crowdnav/serialization.hpp"
#include "crowdnav/transport.hpp"

namespace crowdnav {

MpcProblem make_mpc_problem(const JointObservation& obs, MpcVariant variant,
                            const MpcWeights& weights, const Config& cfg) {
  MpcProblem problem;
  problem.av = obs.av;
  problem.variant = variant;
  problem.horizon = cfg.K;
  problem.weights = weights;
  problem.cem = cfg.cem;
  problem.cfg = cfg;
  for (const auto& ped : obs.peds) {
    problem.current_peds.push_back(ped.position);
    problem.tracks.push_back(ped.track);
  }
  return problem;
}

namespace {

bool at_goal(const VehicleState& av) { return (av.position - av.goal).norm() <= 1e-9; }

}  // namespace

Action mpc_policy(const JointObservation& obs, MpcVariant variant, const MpcWeights& weights,
                  const Config& cfg, MpcSolution* solution) {
  if (at_goal(obs.av)) {
    if (solution) *solution = MpcSolution{};
    return {};
  }
  MpcSolution sol = solve(make_mpc_problem(obs, variant, weights, cfg));
  const Action first = sol.actions.front();
  if (solution) *solution = std::move(sol);
  return first;
}

MpcPlanner::MpcPlanner(MpcVariant variant, Config cfg) : variant_(variant), cfg_(cfg) {}

std::string MpcPlanner::name() const { return std::string("mpc_") + to_string(variant_); }

PlannerDecision MpcPlanner::act(const JointObservation& obs) {
  if (at_goal(obs.av)) return {};
  MpcProblem problem = make_mpc_problem(obs, variant_, cfg_.mpc, cfg_);
  if (previous_ && previous_->actions.size() == static_cast<std::size_t>(cfg_.K)) {
    // Shift the last plan by one step and repeat its final action.
    std::vector<Action> warm(previous_->actions.begin() + 1, previous_->actions.end());
    warm.push_back(previous_->actions.back());
    problem.warm_start = std::move(warm);
  }
  previous_ = solve(problem);
  return {previous_->actions.front(), !previous_->feasible};
}

ScriptedPlanner::ScriptedPlanner(std::string mode, Config cfg) : mode_(std::move(mode)), cfg_(cfg) {
  if (mode_ == "straight") {
    constant_ = {cfg_.v_max, 0.0};
  } else if (mode_ == "stop") {
    constant_ = {0.0, 0.0};
  } else if (mode_.rfind("const:", 0) == 0) {
    const std::string args = mode_.substr(6);
    const auto comma = args.find(',');
    if (comma == std::string::npos) {
      throw InvalidArgument("scripted const mode needs 'const:<v>,<dtheta>'");
    }
    try {
      constant_ = {std::stod(args.substr(0, comma)), std::stod(args.substr(comma + 1))};
    } catch (const std::exception&) {
      throw InvalidArgument("scripted const mode has non-numeric values: '" + args + "'");
    }
  } else if (mode_ != "goal") {
    throw InvalidArgument("unknown scripted mode '" + mode_ + "'");
  }
}

PlannerDecision ScriptedPlanner::act(const JointObservation& obs) {
  if (mode_ != "goal") return {constant_, false};
  const Vec2 to_goal = obs.av.goal - obs.av.position;
  const double bearing = std::atan2(to_goal.y(), to_goal.x());
  const double turn = cfg_.dtheta_step_max();
  const double dtheta = std::clamp(wrap_angle(bearing - obs.av.theta), -turn, turn);
  const double v = std::min({obs.av.v_pref, cfg_.v_max, to_goal.norm() / cfg_.dt});
  return {{v, dtheta}, false};
}

ExternalPlanner::ExternalPlanner(std::string endpoint, std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), channel_(connect_endpoint(endpoint_)), timeout_(timeout) {}

ExternalPlanner::~ExternalPlanner() = default;

PlannerDecision ExternalPlanner::act(const JointObservation& obs) {
  nlohmann::json request = {{"type", "act"}, {"observation", obs}};
  channel_->write_line(request.dump());
  const auto line = channel_->read_line(timeout_);
  if (!line) throw TransportError("external planner '" + endpoint_ + "' closed the connection");
  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(*line);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError("external planner sent malformed JSON: " + std::string(e.what()));
  }
  if (reply.value("type", "") != "action" || !reply.contains("v") || !reply.contains("dtheta")) {
    throw ProtocolError("external planner reply is not an action: " + *line);
  }
  return {{reply.at("v").get<double>(), reply.at("dtheta").get<double>()},
          reply.value("infeasible", false)};
}

PlannerFactory make_planner_factory(const std::string& spec, const Config& cfg) {
  auto mpc = [cfg](MpcVariant v) -> PlannerFactory {
    return [cfg, v] { return std::make_unique<MpcPlanner>(v, cfg); };
  };
  if (spec == "mpc_ed_hard") return mpc(MpcVariant::ed_hard);
  if (spec == "mpc_ed_soft") return mpc(MpcVariant::ed_soft);
  if (spec == "mpc_md" || spec == "mpc_md_hard") return mpc(MpcVariant::md_hard);
  if (spec == "scripted" || spec.rfind("scripted:", 0) == 0) {
    const std::string mode = spec == "scripted" ? "straight" : spec.substr(9);
    ScriptedPlanner probe(mode, cfg);  // reject bad modes up front
    return [mode, cfg] { return std::make_unique<ScriptedPlanner>(mode, cfg); };
  }
  if (spec.rfind("external:", 0) == 0 && spec.size() > 9) {
    const std::string endpoint = spec.substr(9);
    const auto timeout =
        std::chrono::milliseconds(static_cast<long>(cfg.predictor.timeout_s * 1000.0));
    return [endpoint, timeout] { return std::make_unique<ExternalPlanner>(endpoint, timeout); };
  }
  throw InvalidArgument("unknown planner '" + spec +
                        "' (expected mpc_ed_hard, mpc_ed_soft, mpc_md, scripted[:mode] or "
                        "external:<endpoint>)");
}

}  // namespace crowdnav
