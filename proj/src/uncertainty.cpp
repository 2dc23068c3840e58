#include "crowdnav/uncertainty.hpp"

#include <random>
#include <string>

#include <Eigen/Cholesky>

namespace crowdnav {

double combined_loss(std::span<const Vec2> truth, std::span<const Gaussian2D> predictions,
                     double weight) {
  if (truth.size() != predictions.size()) {
    throw InvalidArgument("combined_loss: " + std::to_string(truth.size()) +
                          " ground-truth points vs " + std::to_string(predictions.size()) +
                          " predictions");
  }
  if (truth.empty()) throw InvalidArgument("combined_loss: empty input");
  if (!(weight >= 0.0)) throw InvalidArgument("combined_loss: weight must be >= 0");

  double nll_sum = 0.0;
  double md_sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    nll_sum += nll(truth[i], predictions[i]);
    md_sum += mahalanobis(truth[i], predictions[i]);
  }
  return nll_sum + weight * md_sum;
}

double collision_probability_oracle(const Vec2& p_av, const Gaussian2D& g, double combined_radius,
                                    std::size_t n_samples, std::uint64_t seed) {
  require_positive_definite(g);
  if (n_samples == 0) throw InvalidArgument("collision_probability_oracle: no samples");
  const Eigen::Matrix2d L = g.cov.llt().matrixL();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double r2 = combined_radius * combined_radius;
  std::size_t inside = 0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double z0 = normal(rng);
    const double z1 = normal(rng);
    const Vec2 x = g.mean + L * Vec2(z0, z1);
    if ((x - p_av).squaredNorm() <= r2) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(n_samples);
}

CalibrationReport calibration_metrics(std::span<const std::vector<Vec2>> truth,
                                      std::span<const PredictedTrack> predictions) {
  if (truth.size() != predictions.size()) {
    throw InvalidArgument("calibration_metrics: truth/prediction count mismatch");
  }
  CalibrationReport report;
  double displacement_sum = 0.0;
  double final_sum = 0.0;
  double nll_sum = 0.0;
  std::size_t finals = 0;
  std::array<std::size_t, 3> within = {0, 0, 0};

  for (std::size_t j = 0; j < truth.size(); ++j) {
    const auto& gt = truth[j];
    const auto& steps = predictions[j].steps;
    if (gt.size() != steps.size()) {
      throw InvalidArgument("calibration_metrics: track " + std::to_string(j) +
                            " has mismatched horizon");
    }
    if (steps.empty()) continue;
    for (std::size_t k = 0; k < steps.size(); ++k) {
      const double d = (gt[k] - steps[k].mean).norm();
      const double md = mahalanobis(gt[k], steps[k]);
      displacement_sum += d;
      nll_sum += nll(gt[k], steps[k]);
      for (std::size_t s = 0; s < within.size(); ++s) {
        if (md <= static_cast<double>(s + 1)) ++within[s];
      }
      ++report.pairs;
    }
    final_sum += (gt.back() - steps.back().mean).norm();
    ++finals;
  }
  if (report.pairs == 0) throw InvalidArgument("calibration_metrics: no (pedestrian, step) pairs");

  const auto n = static_cast<double>(report.pairs);
  report.ade = displacement_sum / n;
  report.fde = final_sum / static_cast<double>(finals);
  report.nll = nll_sum / n;
  for (std::size_t s = 0; s < within.size(); ++s) {
    report.desv[s] = static_cast<double>(within[s]) / n - kIdealSigmaFractions[s];
  }
  return report;
}

}  // namespace crowdnav
