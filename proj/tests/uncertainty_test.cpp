#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "crowdnav/error.hpp"
#include "crowdnav/uncertainty.hpp"

using namespace crowdnav;

namespace {

Gaussian2D unit(double mx = 0, double my = 0) { return Gaussian2D::from_triple(mx, my, 1, 0, 1); }

PredictedTrack track(AgentId id, std::vector<Gaussian2D> steps) { return {id, std::move(steps), false}; }

}  // namespace

TEST(CombinedLoss, Examples) {
  const std::vector<Vec2> gt = {Vec2(0, 0)};
  const std::vector<Gaussian2D> pred = {unit()};
  EXPECT_NEAR(combined_loss(gt, pred, 1.0), std::log(2 * kPi), 1e-12);

  const std::vector<Vec2> off = {Vec2(1, 0)};
  EXPECT_NEAR(combined_loss(off, pred, 0.0), nll(Vec2(1, 0), unit()), 1e-15);

  const std::vector<Vec2> twice = {Vec2(1, 0), Vec2(1, 0)};
  const std::vector<Gaussian2D> pred2 = {unit(), unit()};
  EXPECT_DOUBLE_EQ(combined_loss(twice, pred2, 1.0), 2 * combined_loss(off, pred, 1.0));
}

TEST(CombinedLoss, NonDecreasingInWeight) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n;
  std::vector<Vec2> gt;
  std::vector<Gaussian2D> pred;
  for (int i = 0; i < 20; ++i) {
    gt.emplace_back(n(rng), n(rng));
    pred.push_back(unit(n(rng), n(rng)));
  }
  double prev = combined_loss(gt, pred, 0.0);
  for (double w = 0.5; w <= 5.0; w += 0.5) {
    const double v = combined_loss(gt, pred, w);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(CombinedLoss, Errors) {
  const std::vector<Vec2> gt = {Vec2(0, 0)};
  const std::vector<Gaussian2D> none;
  EXPECT_THROW(combined_loss(gt, none, 1.0), InvalidArgument);
  EXPECT_THROW(combined_loss({}, none, 1.0), InvalidArgument);
  const std::vector<Gaussian2D> pred = {unit()};
  EXPECT_THROW(combined_loss(gt, pred, -1.0), InvalidArgument);
}

TEST(Oracle, FullCoverage) {
  const double p = collision_probability_oracle(Vec2(1, 1), unit(), 6.0 + std::sqrt(2.0), 100000, 1);
  EXPECT_NEAR(p, 1.0, 1e-4);
}

TEST(Oracle, IsotropicClosedForm) {
  const auto g = Gaussian2D::from_triple(0, 0, 9, 0, 9);
  const double p = collision_probability_oracle(Vec2(0, 0), g, 2.3, 1000000, 11);
  EXPECT_NEAR(p, 1 - std::exp(-2.3 * 2.3 / 18), 0.002);
}

TEST(Oracle, Deterministic) {
  const auto g = Gaussian2D::from_triple(1, 2, 2, 0.3, 1);
  EXPECT_EQ(collision_probability_oracle(Vec2(0, 0), g, 1.0, 5000, 42),
            collision_probability_oracle(Vec2(0, 0), g, 1.0, 5000, 42));
}

TEST(Calibration, AllAtMean) {
  std::vector<std::vector<Vec2>> truth = {{Vec2(1, 2), Vec2(3, 4)}};
  std::vector<PredictedTrack> pred = {track(1, {unit(1, 2), unit(3, 4)})};
  const auto r = calibration_metrics(truth, pred);
  EXPECT_EQ(r.ade, 0.0);
  EXPECT_EQ(r.fde, 0.0);
  EXPECT_DOUBLE_EQ(r.desv[0], 0.61);
  EXPECT_DOUBLE_EQ(r.desv[1], 1 - 0.86);
  EXPECT_DOUBLE_EQ(r.desv[2], 1 - 0.99);
  EXPECT_EQ(r.pairs, 2u);
}

TEST(Calibration, SinglePairOffset) {
  std::vector<std::vector<Vec2>> truth = {{Vec2(1, 0)}};
  std::vector<PredictedTrack> pred = {track(1, {unit()})};
  const auto r = calibration_metrics(truth, pred);
  EXPECT_DOUBLE_EQ(r.ade, 1.0);
  EXPECT_DOUBLE_EQ(r.fde, 1.0);
  EXPECT_NEAR(r.nll, std::log(2 * kPi) + 0.5, 1e-12);
}

TEST(Calibration, FdeUsesLastStep) {
  std::vector<std::vector<Vec2>> truth = {{Vec2(0, 0), Vec2(3, 0)}};
  std::vector<PredictedTrack> pred = {track(1, {unit(), unit()})};
  const auto r = calibration_metrics(truth, pred);
  EXPECT_DOUBLE_EQ(r.ade, 1.5);
  EXPECT_DOUBLE_EQ(r.fde, 3.0);
}

TEST(Calibration, DesvNonDecreasing) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 2.0);
  std::vector<std::vector<Vec2>> truth;
  std::vector<PredictedTrack> pred;
  for (int i = 0; i < 200; ++i) {
    truth.push_back({Vec2(n(rng), n(rng))});
    pred.push_back(track(i, {unit()}));
  }
  const auto r = calibration_metrics(truth, pred);
  EXPECT_LE(r.desv[0] + kIdealSigmaFractions[0], r.desv[1] + kIdealSigmaFractions[1]);
  EXPECT_LE(r.desv[1] + kIdealSigmaFractions[1], r.desv[2] + kIdealSigmaFractions[2]);
}

TEST(Calibration, SampledFromPredictionIsCalibrated) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u(0.2, 2.0), c(-0.8, 0.8);
  std::vector<std::vector<Vec2>> truth;
  std::vector<PredictedTrack> pred;
  for (int i = 0; i < 10000; ++i) {
    const double sx = u(rng), sy = u(rng), rho = c(rng);
    const auto g = Gaussian2D::from_triple(n(rng), n(rng), sx * sx, rho * sx * sy, sy * sy);
    const Eigen::Matrix2d L = g.cov.llt().matrixL();
    truth.push_back({Vec2(g.mean + L * Vec2(n(rng), n(rng)))});
    pred.push_back(track(i, {g}));
  }
  const auto r = calibration_metrics(truth, pred);
  for (double d : r.desv) EXPECT_LE(std::abs(d), 0.02);
}

TEST(Calibration, Errors) {
  std::vector<std::vector<Vec2>> truth;
  std::vector<PredictedTrack> pred;
  EXPECT_THROW(calibration_metrics(truth, pred), InvalidArgument);
  truth = {{Vec2(0, 0)}};
  pred = {track(1, {unit(), unit()})};
  EXPECT_THROW(calibration_metrics(truth, pred), InvalidArgument);
}
