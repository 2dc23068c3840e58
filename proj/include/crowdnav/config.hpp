#pragma once

#include <cstdint>

namespace crowdnav {

// Cost weights of the receding-horizon planner. q_slack weighs the soft
// variant's slack, which is treated as an extra control input.
struct MpcWeights {
  double q_v = 0.05;
  double q_dtheta = 1.0;
  double q_p = 10.0;
  double q_ed = 0.5;
  double q_slack = 10.0;
  double slack_bound = 1.0;
};

// Cross-entropy sampling parameters.
struct CemSettings {
  int samples = 256;
  int elites = 32;
  int iterations = 8;
  std::uint64_t seed = 0;
};

struct PredictorSettings {
  double sigma0 = 0.1;       // m, std of the first constant-velocity step
  double growth = 0.05;      // m per step
  double sigma_gt = 0.05;    // m, ground-truth replay predictor
  double timeout_s = 5.0;    // external predictor / planner reply timeout
};

struct Config {
  double dt = 0.5;
  double v_max = 4.167;
  double v_min = -1.0;
  double dtheta_rate_max = 0.2;
  double ped_radius = 0.3;
  double av_radius = 1.0;
  double personal_space = 1.0;
  double sensor_range = 15.0;
  double delta = 0.1;
  double r_g = 10.0;
  double r_c = -20.0;
  int K = 6;
  int H = 6;
  double timeout_margin = 15.0;
  double gamma = 0.99;
  double w_theta = 0.1;
  double w_back = 0.25;
  bool speed_dependent_danger = true;
  double goal_radius = 2.0;
  double loss_weight = 1.0;
  int min_frames = 10;
  PredictorSettings predictor;
  MpcWeights mpc;
  CemSettings cem;

  double dtheta_step_max() const { return dtheta_rate_max * dt; }
  // r_ped + r_av + PS, the keep-out radius around a predicted pedestrian.
  double combined_radius() const { return ped_radius + av_radius + personal_space; }
};

/// Throws InvalidArgument when an invariant does not hold.
void validate(const Config& cfg);

}  // namespace crowdnav
