#include "crowdnav/config.hpp"

#include <string>

#include "crowdnav/error.hpp"

namespace crowdnav {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw InvalidArgument(std::string("invalid config: ") + what);
}

}  // namespace

void validate(const Config& cfg) {
  require(cfg.dt > 0.0, "dt must be > 0");
  require(cfg.v_min < 0.0 && 0.0 < cfg.v_max, "need v_min < 0 < v_max");
  require(cfg.dtheta_rate_max > 0.0, "dtheta_rate_max must be > 0");
  require(cfg.ped_radius > 0.0 && cfg.av_radius > 0.0, "radii must be > 0");
  require(cfg.personal_space > 0.0, "personal_space must be > 0");
  require(cfg.sensor_range > 0.0, "sensor_range must be > 0");
  require(cfg.delta > 0.0 && cfg.delta < 1.0, "delta must lie in (0, 1)");
  require(cfg.K >= 1, "K must be >= 1");
  require(cfg.H >= 1, "H must be >= 1");
  require(cfg.timeout_margin >= 0.0, "timeout_margin must be >= 0");
  require(cfg.goal_radius > 0.0, "goal_radius must be > 0");
  require(cfg.w_theta >= 0.0 && cfg.w_back >= 0.0, "action weights must be >= 0");
  require(cfg.loss_weight >= 0.0, "loss_weight must be >= 0");
  require(cfg.min_frames >= 2, "min_frames must be >= 2");
  require(cfg.predictor.sigma0 > 0.0, "predictor.sigma0 must be > 0");
  require(cfg.predictor.growth >= 0.0, "predictor.growth must be >= 0");
  require(cfg.predictor.sigma_gt > 0.0, "predictor.sigma_gt must be > 0");
  require(cfg.predictor.timeout_s > 0.0, "predictor.timeout_s must be > 0");
  const MpcWeights& w = cfg.mpc;
  require(w.q_v >= 0.0 && w.q_dtheta >= 0.0 && w.q_p >= 0.0 && w.q_ed >= 0.0 && w.q_slack >= 0.0,
          "mpc weights must be >= 0");
  require(w.slack_bound >= 0.0, "mpc.slack_bound must be >= 0");
  require(cfg.cem.samples >= 1, "cem.samples must be >= 1");
  require(cfg.cem.elites >= 1 && cfg.cem.elites <= cfg.cem.samples,
          "cem.elites must lie in [1, samples]");
  require(cfg.cem.iterations >= 1, "cem.iterations must be >= 1");
}

}  // namespace crowdnav
