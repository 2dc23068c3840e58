#include "crowdnav/mpc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Core>

#include "crowdnav/error.hpp"

namespace crowdnav {

const char* to_string(MpcVariant variant) {
  switch (variant) {
    case MpcVariant::ed_hard: return "ed_hard";
    case MpcVariant::ed_soft: return "ed_soft";
    case MpcVariant::md_hard: return "md_hard";
  }
  return "ed_hard";
}

MpcVariant mpc_variant_from_string(const std::string& name) {
  if (name == "ed_hard") return MpcVariant::ed_hard;
  if (name == "ed_soft") return MpcVariant::ed_soft;
  if (name == "md_hard") return MpcVariant::md_hard;
  throw InvalidArgument("unknown MPC variant '" + name + "'");
}

namespace {

double normalized_goal_distance(const Vec2& p, const Vec2& goal, const Vec2& start) {
  const double d0 = (start - goal).norm();
  if (!(d0 > 1e-12)) {
    throw InvalidArgument("target cost is undefined when the start coincides with the goal");
  }
  return (p - goal).norm() / d0;
}

const Gaussian2D& step_or_last(const PredictedTrack& track, std::size_t k) {
  return track.steps[std::min(k, track.steps.size() - 1)];
}

}  // namespace

double stage_cost(const Action& action, const Vec2& position, std::span<const Vec2> ped_positions,
                  const MpcWeights& weights, const Vec2& goal, const Vec2& start, double slack) {
  const double j_a = weights.q_v * action.v * action.v +
                     weights.q_dtheta * action.dtheta * action.dtheta +
                     weights.q_slack * slack * slack;
  const double rho = normalized_goal_distance(position, goal, start);
  const double j_p = weights.q_p * rho * rho;
  double j_ed = 0.0;
  for (const auto& ped : ped_positions) {
    const double d = std::max((position - ped).norm(), kMinPedestrianDistance);
    j_ed += 1.0 / (d * d);
  }
  return j_a + j_p + weights.q_ed * j_ed;
}

double terminal_cost(const Vec2& position_k, const Vec2& goal, const Vec2& start, double q_p) {
  const double rho = normalized_goal_distance(position_k, goal, start);
  return q_p * rho * rho;
}

double md_threshold(const Gaussian2D& g, double combined_radius, double delta) {
  require_positive_definite(g);
  const double sqrt_det_2pi_sigma = 2.0 * kPi * std::sqrt(g.determinant());
  return -2.0 * std::log(sqrt_det_2pi_sigma * delta / disc_area(combined_radius));
}

ConstraintCheck check_constraints(std::span<const Vec2> planned_positions,
                                  std::span<const PredictedTrack> tracks, MpcVariant variant,
                                  const Config& cfg, double slack_bound) {
  ConstraintCheck out;
  const double keep_out = cfg.combined_radius();
  const double physical = cfg.ped_radius + cfg.av_radius;
  const double soft_required = std::max(keep_out - slack_bound, physical);
  if (variant == MpcVariant::ed_soft) out.stage_slack.assign(planned_positions.size(), 0.0);

  for (std::size_t k = 0; k < planned_positions.size(); ++k) {
    const Vec2& p = planned_positions[k];
    for (const auto& track : tracks) {
      if (track.steps.empty()) continue;
      const Gaussian2D& g = step_or_last(track, k);
      double violation = 0.0;
      switch (variant) {
        case MpcVariant::ed_hard:
          violation = keep_out - (p - g.mean).norm();
          break;
        case MpcVariant::ed_soft: {
          const double d = (p - g.mean).norm();
          violation = soft_required - d;
          const double slack = std::clamp(keep_out - d, 0.0, slack_bound);
          out.stage_slack[k] = std::max(out.stage_slack[k], slack);
          out.slack_used = std::max(out.slack_used, slack);
          break;
        }
        case MpcVariant::md_hard:
          violation = md_threshold(g, keep_out, cfg.delta) - squared_mahalanobis(p, g);
          break;
      }
      out.worst_violation = std::max(out.worst_violation, violation);
    }
  }
  out.feasible = out.worst_violation <= kFeasibilityTolerance;
  return out;
}

std::vector<Vec2> rollout_positions(const VehicleState& start, std::span<const Action> actions,
                                    double dt) {
  std::vector<Vec2> positions;
  positions.reserve(actions.size());
  VehicleState s = start;
  for (const auto& a : actions) {
    s = unicycle_step(s, a, dt);
    positions.push_back(s.position);
  }
  return positions;
}

namespace {

struct Evaluated {
  Eigen::VectorXd x;
  double cost = 0.0;
  double violation = 0.0;
  double slack = 0.0;
  bool feasible = false;

  // Feasible plans by cost, then infeasible ones by violation.
  bool better_than(const Evaluated& o) const {
    if (feasible != o.feasible) return feasible;
    if (!feasible && violation != o.violation) return violation < o.violation;
    return cost < o.cost;
  }
  double score() const { return feasible ? cost : std::numeric_limits<double>::infinity(); }
};

class CemSolver {
 public:
  explicit CemSolver(const MpcProblem& p) : p_(p), K_(p.horizon) {
    const double turn = p.cfg.dtheta_step_max();
    lo_.resize(2 * K_);
    hi_.resize(2 * K_);
    for (int k = 0; k < K_; ++k) {
      lo_(2 * k) = p.cfg.v_min;
      hi_(2 * k) = p.cfg.v_max;
      lo_(2 * k + 1) = -turn;
      hi_(2 * k + 1) = turn;
    }
    goal_ = p.av.goal;
    start_ = p.av.position;
    for (int k = 1; k < K_; ++k) {
      std::vector<Vec2> means;
      for (const auto& t : p.tracks) {
        if (!t.steps.empty()) means.push_back(step_or_last(t, static_cast<std::size_t>(k - 1)).mean);
      }
      stage_peds_.push_back(std::move(means));
    }
  }

  std::vector<Action> actions(const Eigen::VectorXd& x) const {
    std::vector<Action> out(static_cast<std::size_t>(K_));
    for (int k = 0; k < K_; ++k) out[static_cast<std::size_t>(k)] = {x(2 * k), x(2 * k + 1)};
    return out;
  }

  Evaluated evaluate(const Eigen::VectorXd& x) const {
    Evaluated e;
    e.x = x;
    const auto acts = actions(x);
    const auto pos = rollout_positions(p_.av, acts, p_.cfg.dt);
    const double bound = p_.variant == MpcVariant::ed_soft ? p_.weights.slack_bound : 0.0;
    const auto check = check_constraints(pos, p_.tracks, p_.variant, p_.cfg, bound);
    e.violation = check.worst_violation;
    e.feasible = check.feasible;
    e.slack = check.slack_used;
    double cost = 0.0;
    for (int k = 0; k < K_; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      const Vec2& p = k == 0 ? start_ : pos[ks - 1];
      const std::vector<Vec2>& peds = k == 0 ? p_.current_peds : stage_peds_[ks - 1];
      const double slack = check.stage_slack.empty() ? 0.0 : check.stage_slack[ks];
      cost += stage_cost(acts[ks], p, peds, p_.weights, goal_, start_, slack);
    }
    cost += terminal_cost(pos.back(), goal_, start_, p_.weights.q_p);
    e.cost = cost;
    return e;
  }

  Eigen::VectorXd clip(Eigen::VectorXd x) const { return x.cwiseMax(lo_).cwiseMin(hi_); }

  Eigen::VectorXd constant(double v, double dtheta) const {
    Eigen::VectorXd x(2 * K_);
    for (int k = 0; k < K_; ++k) {
      x(2 * k) = v;
      x(2 * k + 1) = dtheta;
    }
    return clip(x);
  }

  MpcSolution run() {
    const auto t0 = std::chrono::steady_clock::now();
    const CemSettings& cem = p_.cem;
    const int n = cem.samples;
    const int n_elite = std::min(cem.elites, n);
    const double turn = p_.cfg.dtheta_step_max();

    Eigen::VectorXd mean = constant(0.5 * p_.cfg.v_max, 0.0);
    if (p_.warm_start && static_cast<int>(p_.warm_start->size()) == K_) {
      for (int k = 0; k < K_; ++k) {
        mean(2 * k) = (*p_.warm_start)[static_cast<std::size_t>(k)].v;
        mean(2 * k + 1) = (*p_.warm_start)[static_cast<std::size_t>(k)].dtheta;
      }
      mean = clip(mean);
    }
    const Eigen::VectorXd half_box = 0.5 * (hi_ - lo_);
    Eigen::VectorXd stddev = half_box;
    const Eigen::VectorXd min_std = 0.02 * half_box;

    std::vector<Eigen::VectorXd> seeds = {mean,
                                          constant(0.0, 0.0),
                                          constant(p_.cfg.v_max, 0.0),
                                          constant(p_.cfg.v_max, turn),
                                          constant(p_.cfg.v_max, -turn),
                                          constant(0.5 * p_.cfg.v_max, turn),
                                          constant(0.5 * p_.cfg.v_max, -turn),
                                          constant(p_.cfg.v_min, 0.0)};

    std::mt19937_64 rng(cem.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    MpcSolution sol;
    std::vector<Evaluated> elites;
    for (int it = 0; it < cem.iterations; ++it) {
      std::vector<Eigen::VectorXd> xs(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        Eigen::VectorXd z(2 * K_);
        for (int d = 0; d < 2 * K_; ++d) z(d) = normal(rng);
        if (it == 0 && i < static_cast<int>(seeds.size())) {
          xs[static_cast<std::size_t>(i)] = seeds[static_cast<std::size_t>(i)];
        } else {
          xs[static_cast<std::size_t>(i)] = clip(mean + stddev.cwiseProduct(z));
        }
      }
      // Evaluation order does not influence the result: reduction is by index.
      std::vector<Evaluated> pool;
      pool.reserve(static_cast<std::size_t>(n) + elites.size());
      for (const auto& e : elites) pool.push_back(e);
      for (const auto& x : xs) pool.push_back(evaluate(x));
      sol.stats.samples += n;

      std::vector<std::size_t> order(pool.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return pool[a].better_than(pool[b]); });
      std::vector<Evaluated> next;
      next.reserve(static_cast<std::size_t>(n_elite));
      for (int i = 0; i < n_elite && i < static_cast<int>(order.size()); ++i) {
        next.push_back(pool[order[static_cast<std::size_t>(i)]]);
      }
      elites = std::move(next);

      double score_sum = 0.0;
      Eigen::VectorXd m = Eigen::VectorXd::Zero(2 * K_);
      for (const auto& e : elites) {
        score_sum += e.score();
        m += e.x;
      }
      m /= static_cast<double>(elites.size());
      Eigen::VectorXd var = Eigen::VectorXd::Zero(2 * K_);
      for (const auto& e : elites) var += (e.x - m).cwiseAbs2();
      var /= static_cast<double>(elites.size());
      mean = m;
      stddev = var.cwiseSqrt().cwiseMax(min_std);
      sol.stats.elite_mean_costs.push_back(score_sum / static_cast<double>(elites.size()));
      ++sol.stats.iterations;
    }

    const Evaluated& best = elites.front();
    sol.actions = actions(best.x);
    sol.planned_positions = rollout_positions(p_.av, sol.actions, p_.cfg.dt);
    sol.cost = best.cost;
    sol.feasible = best.feasible;
    sol.slack_used = best.slack;
    sol.worst_violation = best.violation;
    sol.stats.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
  }

 private:
  const MpcProblem& p_;
  int K_;
  Eigen::VectorXd lo_;
  Eigen::VectorXd hi_;
  Vec2 goal_;
  Vec2 start_;
  std::vector<std::vector<Vec2>> stage_peds_;  // predicted means for stages 1..K-1
};

}  // namespace

MpcSolution solve(const MpcProblem& problem) {
  if (problem.horizon < 1) throw InvalidArgument("MPC horizon must be >= 1");
  const MpcWeights& w = problem.weights;
  if (!(w.q_v >= 0.0 && w.q_dtheta >= 0.0 && w.q_p >= 0.0 && w.q_ed >= 0.0 &&
        w.q_slack >= 0.0 && w.slack_bound >= 0.0)) {
    throw InvalidArgument("MPC weights must be non-negative");
  }
  if (problem.cem.samples < 1 || problem.cem.elites < 1 || problem.cem.iterations < 1) {
    throw InvalidArgument("invalid cross-entropy settings");
  }
  for (const auto& track : problem.tracks) {
    for (const auto& g : track.steps) require_positive_definite(g);
  }
  CemSolver solver(problem);
  return solver.run();
}

}  // namespace crowdnav
