#include "crowdnav/env.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "crowdnav/error.hpp"

namespace crowdnav {

const char* to_string(TerminalKind kind) {
  switch (kind) {
    case TerminalKind::running: return "running";
    case TerminalKind::goal: return "goal";
    case TerminalKind::collision: return "collision";
    case TerminalKind::timeout: return "timeout";
  }
  return "running";
}

TerminalKind terminal_kind_from_string(const std::string& name) {
  if (name == "running") return TerminalKind::running;
  if (name == "goal") return TerminalKind::goal;
  if (name == "collision") return TerminalKind::collision;
  if (name == "timeout") return TerminalKind::timeout;
  throw InvalidArgument("unknown terminal kind '" + name + "'");
}

double prediction_penalty(const Vec2& p_av, std::span<const PredictedTrack> tracks,
                          const Config& cfg) {
  const double radius = cfg.combined_radius();
  double worst = 0.0;
  for (const auto& track : tracks) {
    double penalty = 0.0;
    for (std::size_t k = 0; k < track.steps.size(); ++k) {
      if (collision_probability(p_av, track.steps[k], radius) > cfg.delta) {
        penalty = std::min(penalty, cfg.r_c / std::ldexp(1.0, static_cast<int>(k + 1)));
      }
    }
    worst = std::min(worst, penalty);
  }
  return worst;
}

double danger_penalty(double d_min, double speed, const Config& cfg) {
  const double depth = (cfg.personal_space - d_min) / cfg.personal_space;
  if (cfg.speed_dependent_danger) return cfg.r_c * (1.0 + std::abs(speed) / cfg.v_max) * depth;
  return cfg.r_c * depth;
}

RewardResult compute_reward(const VehicleState& prev, const VehicleState& cur,
                            const Action& action, std::span<const PedestrianState> peds,
                            std::span<const PredictedTrack> tracks, const Config& cfg) {
  RewardResult out;
  RewardBreakdown& b = out.breakdown;
  b.d_min = min_separation(cur, peds);

  // An AV already inside the goal set stays there whatever it does next.
  const bool at_goal = (cur.position - cur.goal).norm() <= cfg.goal_radius ||
                       (prev.position - prev.goal).norm() <= cfg.goal_radius;
  if (at_goal) {
    b.branch = RewardBranch::goal;
    out.reward = cfg.r_g;
  } else if (b.d_min < 0.0) {
    b.branch = RewardBranch::collision;
    out.reward = cfg.r_c;
  } else if (b.d_min < cfg.personal_space) {
    b.branch = RewardBranch::danger;
    b.danger = true;
    b.r_danger = danger_penalty(b.d_min, cur.speed(), cfg);
    out.reward = b.r_danger;
  } else {
    b.branch = RewardBranch::regular;
    b.r_progress = (prev.position - prev.goal).norm() - (cur.position - cur.goal).norm();
    b.r_pred = prediction_penalty(cur.position, tracks, cfg);
    b.r_action = -cfg.w_theta * std::abs(action.dtheta) - cfg.w_back * std::max(0.0, -action.v);
    out.reward = b.r_progress + b.r_pred + b.r_action;
  }
  return out;
}

JointObservation build_observation(const VehicleState& av,
                                   std::span<const PedestrianState> frame_peds,
                                   Predictor& predictor, const Config& cfg,
                                   const ObservationContext& ctx) {
  JointObservation obs;
  obs.t = ctx.t;
  obs.av = av;

  PredictorInput input;
  input.t = ctx.t;
  input.dt = cfg.dt;
  input.K = cfg.K;
  input.replay = {ctx.scenario, ctx.time};
  for (const auto& ped : frame_peds) {
    if ((ped.position - av.position).norm() > cfg.sensor_range) continue;
    ObservedPedestrian seen;
    seen.id = ped.id;
    seen.position = ped.position;
    obs.peds.push_back(std::move(seen));

    PedestrianHistory history;
    history.id = ped.id;
    history.positions.resize(static_cast<std::size_t>(cfg.H));
    for (int j = 0; j < cfg.H - 1; ++j) {
      const double tj = ctx.time - (cfg.H - 1 - j) * cfg.dt;
      if (ctx.scenario != nullptr && tj > -1e-9) {
        history.positions[static_cast<std::size_t>(j)] = ctx.scenario->pedestrian_position(ped.id, tj);
      }
    }
    history.positions.back() = ped.position;
    input.peds.push_back(std::move(history));
  }
  if (obs.peds.empty()) return obs;

  // Pad the AV history at the front with its oldest known state.
  const auto& hist = ctx.av_history;
  const std::size_t H = static_cast<std::size_t>(cfg.H);
  input.av_history.reserve(H);
  for (std::size_t j = 0; j < H; ++j) {
    const std::size_t missing = H > hist.size() ? H - hist.size() : 0;
    if (hist.empty()) {
      input.av_history.push_back(av);
    } else if (j < missing) {
      input.av_history.push_back(hist.front());
    } else {
      input.av_history.push_back(hist[hist.size() - H + j]);
    }
  }
  input.av_projection = project_av(av, ctx.last_action, cfg.K, cfg.dt);

  PredictorOutput output;
  try {
    output = validate_prediction(input, predictor.predict(input));
  } catch (const Error& e) {
    throw PredictorError("predictor '" + predictor.name() + "' failed at step " +
                         std::to_string(ctx.t) + ": " + e.what());
  }
  for (std::size_t i = 0; i < obs.peds.size(); ++i) {
    obs.peds[i].track = std::move(output.tracks[i]);
  }
  return obs;
}

Environment::Environment(Config cfg, std::unique_ptr<Predictor> predictor)
    : cfg_(cfg), predictor_(std::move(predictor)) {
  validate(cfg_);
  if (!predictor_) throw InvalidArgument("Environment needs a predictor");
}

const Scenario& Environment::scenario() const {
  if (!scenario_) throw InvalidArgument("environment has not been reset");
  return *scenario_;
}

const JointObservation& Environment::reset(std::shared_ptr<const Scenario> scenario) {
  if (!scenario) throw InvalidArgument("reset: null scenario");
  scenario->validate();
  scenario_ = std::move(scenario);

  const auto& ref = scenario_->ego_reference;
  av_ = VehicleState{};
  av_.position = ref.front();
  av_.radius = cfg_.av_radius;
  av_.v_pref = cfg_.v_max;
  av_.goal = ref.back();
  for (std::size_t i = 1; i < ref.size(); ++i) {
    const Vec2 d = ref[i] - ref.front();
    if (d.norm() > 1e-9) {
      av_.theta = wrap_angle(std::atan2(d.y(), d.x()));
      break;
    }
  }
  av_history_.assign(1, av_);
  last_action_ = {};
  steps_ = 0;
  kind_ = TerminalKind::running;
  record_ = EpisodeRecord{};
  record_.scenario_id = scenario_->id;
  obs_ = observe();
  return obs_;
}

JointObservation Environment::observe() {
  const double time = steps_ * cfg_.dt;
  const auto peds = scenario_->pedestrians_at(time);
  ObservationContext ctx;
  ctx.t = steps_;
  ctx.time = time;
  ctx.scenario = scenario_.get();
  ctx.av_history = av_history_;
  ctx.last_action = last_action_;
  return build_observation(av_, peds, *predictor_, cfg_, ctx);
}

StepOutcome Environment::step(const Action& action, const StepAnnotation& note) {
  if (!scenario_) throw InvalidArgument("step before reset");
  if (done()) {
    throw InvalidArgument(std::string("step after episode end (") + to_string(kind_) + ")");
  }
  const Action applied = clamp_action(action, cfg_);
  const VehicleState prev = av_;
  av_ = unicycle_step(av_, applied, cfg_.dt);
  ++steps_;
  last_action_ = applied;
  av_history_.push_back(av_);
  if (av_history_.size() > static_cast<std::size_t>(cfg_.H)) {
    av_history_.erase(av_history_.begin());
  }

  const double time = steps_ * cfg_.dt;
  const auto peds = scenario_->pedestrians_at(time);
  obs_ = observe();

  std::vector<PredictedTrack> tracks;
  tracks.reserve(obs_.peds.size());
  for (const auto& p : obs_.peds) tracks.push_back(p.track);
  const RewardResult rr = compute_reward(prev, av_, applied, peds, tracks, cfg_);

  if (rr.breakdown.branch == RewardBranch::goal) {
    kind_ = TerminalKind::goal;
  } else if (rr.breakdown.branch == RewardBranch::collision) {
    kind_ = TerminalKind::collision;
  } else if (time >= scenario_->time_budget - 1e-9) {
    kind_ = TerminalKind::timeout;
  }

  StepLog log;
  log.t = steps_;
  log.av = av_;
  log.action = applied;
  log.reward = rr.reward;
  log.d_min = rr.breakdown.d_min;
  log.intrusion = log.d_min >= 0.0 && log.d_min < cfg_.personal_space;
  log.infeasible = note.infeasible;
  log.planner_time_s = note.planner_time_s;
  record_.steps.push_back(log);
  record_.path_length += (av_.position - prev.position).norm();
  record_.nav_time = time;
  record_.terminal_kind = kind_;

  StepOutcome out;
  out.obs = obs_;
  out.reward = rr.reward;
  out.done = done();
  out.terminal_kind = kind_;
  out.info = rr.breakdown;
  return out;
}

}  // namespace crowdnav
