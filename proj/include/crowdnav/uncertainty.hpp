#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "crowdnav/core.hpp"
#include "crowdnav/gaussian.hpp"

namespace crowdnav {

// Predicted future of one pedestrian, one Gaussian per step t+1..t+K.
// `fallback` marks tracks synthesised without real future information.
struct PredictedTrack {
  AgentId ped_id = 0;
  std::vector<Gaussian2D> steps;
  bool fallback = false;
};

/// Ideal Gaussian mass inside the 1, 2 and 3 sigma shells, as used for the
/// delta empirical sigma values.
inline constexpr std::array<double, 3> kIdealSigmaFractions = {0.39, 0.86, 0.99};

struct CalibrationReport {
  double ade = 0.0;
  double fde = 0.0;
  double nll = 0.0;
  std::array<double, 3> desv = {0.0, 0.0, 0.0};
  std::size_t pairs = 0;
};

/// sum_i nll(gt_i, pred_i) + weight * sum_i d_MD(gt_i, pred_i).
double combined_loss(std::span<const Vec2> truth, std::span<const Gaussian2D> predictions,
                     double weight);

/// Monte Carlo estimate of P(|X - p_av| <= radius), X ~ g. Deterministic for a
/// given seed; draws come from a single sequential stream.
double collision_probability_oracle(const Vec2& p_av, const Gaussian2D& g, double combined_radius,
                                    std::size_t n_samples, std::uint64_t seed);

/// Scores predicted tracks against aligned ground-truth positions.
/// truth[j][k] is the true position at step k of prediction j.
CalibrationReport calibration_metrics(std::span<const std::vector<Vec2>> truth,
                                      std::span<const PredictedTrack> predictions);

}  // namespace crowdnav
