#include <cmath>
#include <functional>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "crowdnav/data.hpp"
#include "crowdnav/env.hpp"
#include "crowdnav/error.hpp"
#include "crowdnav/serialization.hpp"

using namespace crowdnav;

namespace {

// Straight reference from (0,0) to (length,0); pedestrians given per time.
std::shared_ptr<const Scenario> line_scenario(
    double length, int frames, std::function<std::vector<PedestrianState>(double)> peds = {}) {
  auto s = std::make_shared<Scenario>();
  s->id = "line";
  s->fps = 2.0;
  for (int f = 0; f < frames; ++f) {
    s->ego_reference.emplace_back(length * f / (frames - 1), 0.0);
    s->ped_frames.push_back(peds ? peds(f / 2.0) : std::vector<PedestrianState>{});
  }
  s->time_budget = (frames - 1) / 2.0 + 15.0;
  return s;
}

std::unique_ptr<Predictor> cv() { return std::make_unique<ConstantVelocityPredictor>(0.1, 0.05); }

VehicleState vehicle(double x, double y, double speed, Vec2 goal) {
  VehicleState s;
  s.position = Vec2(x, y);
  s.velocity = Vec2(speed, 0);
  s.goal = goal;
  return s;
}

PredictedTrack track_hits(const Vec2& p, int K, std::vector<int> firing_steps) {
  PredictedTrack t;
  t.ped_id = 1;
  for (int k = 1; k <= K; ++k) {
    const bool fire = std::find(firing_steps.begin(), firing_steps.end(), k) != firing_steps.end();
    const Vec2 m = fire ? p : Vec2(p + Vec2(100, 100));
    t.steps.push_back(Gaussian2D::from_triple(m.x(), m.y(), 0.01, 0, 0.01));
  }
  return t;
}

}  // namespace

TEST(Reset, StartsAtReferenceStart) {
  Environment env(Config{}, cv());
  auto s = line_scenario(20, 21);
  const auto& obs = env.reset(s);
  EXPECT_EQ(obs.av.position, s->ego_reference.front());
  EXPECT_EQ(obs.av.goal, s->ego_reference.back());
  EXPECT_EQ(obs.av.theta, 0.0);
  EXPECT_TRUE(obs.peds.empty());
}

TEST(Reset, Deterministic) {
  const auto s = std::make_shared<const Scenario>(synth_scenario(SynthTemplate::crossing, 4, 3, Config{}));
  Environment a(Config{}, cv()), b(Config{}, cv());
  EXPECT_EQ(nlohmann::json(a.reset(s)).dump(), nlohmann::json(b.reset(s)).dump());
  EXPECT_EQ(nlohmann::json(a.reset(s)).dump(), nlohmann::json(b.observation()).dump());
}

TEST(Step, GoalReward) {
  Environment env(Config{}, cv());
  env.reset(line_scenario(2.5, 3));
  const auto out = env.step({2.0, 0.0});
  EXPECT_TRUE(out.done);
  EXPECT_EQ(out.terminal_kind, TerminalKind::goal);
  EXPECT_EQ(out.reward, 10.0);
}

TEST(Step, CollisionReward) {
  Environment env(Config{}, cv());
  env.reset(line_scenario(20, 21, [](double) { return std::vector<PedestrianState>{{1, Vec2(2.0, 0), 0.3}}; }));
  const auto out = env.step({2.0, 0.0});
  EXPECT_EQ(out.terminal_kind, TerminalKind::collision);
  EXPECT_EQ(out.reward, -20.0);
  EXPECT_LT(out.info.d_min, 0.0);
  EXPECT_THROW(env.step({0, 0}), InvalidArgument);
}

TEST(Step, TimeoutAtBudget) {
  Config cfg;
  SynthOptions o;
  o.length = 50;
  const auto s = std::make_shared<const Scenario>(synth_scenario(SynthTemplate::static_crowd, 0, 0, cfg, o));
  EXPECT_DOUBLE_EQ(s->time_budget, 35.0);
  Environment env(cfg, cv());
  env.reset(s);
  int steps = 0;
  StepOutcome out;
  while (!env.done()) {
    out = env.step({0, 0});
    ++steps;
  }
  EXPECT_EQ(out.terminal_kind, TerminalKind::timeout);
  EXPECT_EQ(steps, 70);
  EXPECT_DOUBLE_EQ(env.record().nav_time, 35.0);
}

TEST(Step, SameActionsSameRecord) {
  const auto s = std::make_shared<const Scenario>(synth_scenario(SynthTemplate::head_on, 5, 9, Config{}));
  auto run = [&] {
    Environment env(Config{}, cv());
    env.reset(s);
    for (int i = 0; i < 10 && !env.done(); ++i) env.step({1.0 + 0.2 * i, 0.05 * (i % 3 - 1)});
    return nlohmann::json(env.record()).dump();
  };
  EXPECT_EQ(run(), run());
}

TEST(Step, PedestriansIgnoreActions) {
  const auto s = std::make_shared<const Scenario>(synth_scenario(SynthTemplate::head_on, 4, 2, Config{}));
  Environment a(Config{}, cv()), b(Config{}, cv());
  a.reset(s);
  b.reset(s);
  for (int i = 0; i < 8 && !a.done() && !b.done(); ++i) {
    const auto oa = a.step({0.0, 0.1});
    const auto ob = b.step({3.0, -0.1});
    const auto pa = s->pedestrians_at(a.elapsed());
    const auto pb = s->pedestrians_at(b.elapsed());
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t j = 0; j < pa.size(); ++j) EXPECT_EQ(pa[j].position, pb[j].position);
  }
}

TEST(Reward, DangerFixtures) {
  Config cfg;
  cfg.speed_dependent_danger = false;
  EXPECT_DOUBLE_EQ(danger_penalty(0.5, 3.0, cfg), -10.0);
  cfg.speed_dependent_danger = true;
  EXPECT_DOUBLE_EQ(danger_penalty(0.5, cfg.v_max, cfg), -20.0);
}

TEST(Reward, DangerProperties) {
  Config dep, indep;
  indep.speed_dependent_danger = false;
  for (double d = 0.0; d < 1.0; d += 0.05) {
    for (double v = 0.0; v <= dep.v_max; v += 0.5) {
      const double a = danger_penalty(d, v, dep), b = danger_penalty(d, v, indep);
      EXPECT_LE(a, b);
      if (v == 0.0) EXPECT_EQ(a, b);
      if (v > 0.0) EXPECT_LT(a, b);
    }
  }
  EXPECT_NEAR(danger_penalty(1e-12, 2.0, dep), dep.r_c * (1 + 2.0 / dep.v_max), 1e-9);
  EXPECT_NEAR(danger_penalty(1e-12, 2.0, indep), indep.r_c, 1e-9);
  EXPECT_NEAR(danger_penalty(1.0 - 1e-12, 2.0, dep), 0.0, 1e-9);
}

TEST(Reward, BranchValues) {
  const Config cfg;
  const Vec2 goal(20, 0);
  const std::vector<PedestrianState> none;
  const std::vector<PredictedTrack> no_tracks;

  auto r = compute_reward(vehicle(0, 0, 2, goal), vehicle(0.5, 0, 2, goal), {2, 0}, none, no_tracks, cfg);
  EXPECT_EQ(r.breakdown.branch, RewardBranch::regular);
  EXPECT_DOUBLE_EQ(r.reward, 0.5);

  const Vec2 near_goal(1, 0);
  r = compute_reward(vehicle(-2, 0, 2, near_goal), vehicle(-0.5, 0, 2, near_goal), {2, 0}, none,
                     no_tracks, cfg);
  EXPECT_EQ(r.breakdown.branch, RewardBranch::goal);
  EXPECT_EQ(r.reward, 10.0);

  const std::vector<PedestrianState> ped = {{1, Vec2(1.8, 0), 0.3}};
  r = compute_reward(vehicle(0, 0, 0, goal), vehicle(0, 0, 0, goal), {0, 0}, ped, no_tracks, cfg);
  EXPECT_EQ(r.breakdown.branch, RewardBranch::danger);
  EXPECT_NEAR(r.reward, -20 * 0.5, 1e-12);

  const std::vector<PedestrianState> hit = {{1, Vec2(1.0, 0), 0.3}};
  r = compute_reward(vehicle(0, 0, 0, goal), vehicle(0, 0, 0, goal), {0, 0}, hit, no_tracks, cfg);
  EXPECT_EQ(r.breakdown.branch, RewardBranch::collision);
  EXPECT_EQ(r.reward, -20.0);
}

TEST(Reward, ActionTerms) {
  const Config cfg;
  const Vec2 goal(20, 0);
  const auto r = compute_reward(vehicle(0, 0, 0, goal), vehicle(0, 0, 0, goal), {-1.0, -0.1}, {}, {}, cfg);
  EXPECT_NEAR(r.breakdown.r_action, -0.1 * 0.1 - 0.25 * 1.0, 1e-15);
}

TEST(Reward, BranchExclusivity) {
  const Config cfg;
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-6, 6);
  for (int i = 0; i < 2000; ++i) {
    const Vec2 goal(u(rng), u(rng));
    const auto prev = vehicle(u(rng), u(rng), 1, goal);
    const auto cur = vehicle(prev.position.x() + u(rng) / 6, prev.position.y() + u(rng) / 6, 1, goal);
    const std::vector<PedestrianState> peds = {{1, Vec2(u(rng), u(rng)), 0.3}};
    const std::vector<PredictedTrack> tracks = {track_hits(cur.position, 6, {2})};
    const auto r = compute_reward(prev, cur, {1, 0.05}, peds, tracks, cfg);
    const auto& b = r.breakdown;
    if (b.branch != RewardBranch::regular) {
      EXPECT_EQ(b.r_progress, 0.0);
      EXPECT_EQ(b.r_pred, 0.0);
      EXPECT_EQ(b.r_action, 0.0);
    }
    if (b.branch != RewardBranch::danger) {
      EXPECT_EQ(b.r_danger, 0.0);
      EXPECT_FALSE(b.danger);
    }
    if (b.branch == RewardBranch::regular) {
      EXPECT_EQ(r.reward, b.r_progress + b.r_pred + b.r_action);
      EXPECT_EQ(b.r_pred, -5.0);
    }
  }
}

TEST(PredictionPenalty, Fixtures) {
  const Config cfg;
  const Vec2 p(3, 4);
  std::vector<PredictedTrack> only2 = {track_hits(p, 6, {2})};
  EXPECT_EQ(prediction_penalty(p, only2, cfg), -5.0);
  std::vector<PredictedTrack> one_three = {track_hits(p, 6, {1, 3})};
  EXPECT_EQ(prediction_penalty(p, one_three, cfg), -10.0);
  std::vector<PredictedTrack> both = {track_hits(p, 6, {2}), track_hits(p, 6, {1})};
  EXPECT_EQ(prediction_penalty(p, both, cfg), -10.0);
  std::vector<PredictedTrack> none = {track_hits(p, 6, {})};
  EXPECT_EQ(prediction_penalty(p, none, cfg), 0.0);
}

TEST(PredictionPenalty, WideCovarianceRemovesPenalty) {
  const Config cfg;
  const Vec2 p(0, 0);
  PredictedTrack t = track_hits(p, 3, {1});
  std::vector<PredictedTrack> v = {t};
  EXPECT_EQ(prediction_penalty(p, v, cfg), -10.0);
  // Probability at the mean is V/(2 pi sigma^2); it falls below delta once sigma is large.
  double prev = prediction_penalty(p, v, cfg);
  for (double s = 0.1; s < 20; s *= 1.5) {
    v[0].steps[0] = Gaussian2D::isotropic(p, s);
    const double pen = prediction_penalty(p, v, cfg);
    EXPECT_GE(pen, prev);
    prev = pen;
  }
  EXPECT_EQ(prev, 0.0);
}

TEST(Observation, SensorRange) {
  const Config cfg;
  ConstantVelocityPredictor pred(0.1, 0.05);
  VehicleState av;
  const std::vector<PedestrianState> peds = {{1, Vec2(14.9, 0), 0.3}, {2, Vec2(0, 15.1), 0.3}};
  ObservationContext ctx;
  const auto obs = build_observation(av, peds, pred, cfg, ctx);
  ASSERT_EQ(obs.peds.size(), 1u);
  EXPECT_EQ(obs.peds[0].id, 1);
  EXPECT_EQ(obs.peds[0].track.steps.size(), 6u);
  EXPECT_TRUE(build_observation(av, {}, pred, cfg, ctx).peds.empty());
}

TEST(Observation, EnteringPedestrianGetsDegeneratePrediction) {
  // Pedestrian 2 appears at t = 2 s and walks; with one history sample the
  // constant-velocity prediction stands still.
  auto s = line_scenario(30, 41, [](double t) {
    std::vector<PedestrianState> p;
    if (t >= 2.0) p.push_back({2, Vec2(10, 5 - (t - 2.0)), 0.3});
    return p;
  });
  Environment env(Config{}, cv());
  env.reset(s);
  StepOutcome out;
  for (int i = 0; i < 4; ++i) out = env.step({0.5, 0});
  ASSERT_EQ(out.obs.peds.size(), 1u);
  for (const auto& g : out.obs.peds[0].track.steps) EXPECT_EQ(g.mean, Vec2(10, 5));
  out = env.step({0.5, 0});
  EXPECT_NEAR(out.obs.peds[0].track.steps[0].mean.y(), 4.5 - 0.5, 1e-12);
}

TEST(Observation, PredictorFailureIsReported) {
  class Broken : public Predictor {
   public:
    PredictorOutput predict(const PredictorInput&) override { return {}; }
    std::string name() const override { return "broken"; }
  };
  Environment env(Config{}, std::make_unique<Broken>());
  auto s = line_scenario(20, 21, [](double) { return std::vector<PedestrianState>{{1, Vec2(5, 5), 0.3}}; });
  EXPECT_THROW(env.reset(s), PredictorError);
}
