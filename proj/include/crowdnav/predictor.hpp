#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "crowdnav/core.hpp"
#include "crowdnav/uncertainty.hpp"

namespace crowdnav {

struct Scenario;
class LineChannel;

struct PedestrianHistory {
  AgentId id = 0;
  // Oldest first; the last entry is the current step. Absent samples are empty.
  std::vector<std::optional<Vec2>> positions;
};

// Replay access for predictors that may look at recorded futures.
struct ReplayView {
  const Scenario* scenario = nullptr;
  double time = 0.0;
};

struct PredictorInput {
  int t = 0;
  double dt = 0.5;
  int K = 6;
  std::vector<PedestrianHistory> peds;
  std::vector<VehicleState> av_history;  // oldest first, length H
  std::vector<Vec2> av_projection;       // K constant-action positions
  ReplayView replay;
};

struct PredictorOutput {
  std::vector<PredictedTrack> tracks;
};

class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual PredictorOutput predict(const PredictorInput& input) = 0;
  virtual std::string name() const = 0;
};

using PredictorFactory = std::function<std::unique_ptr<Predictor>()>;

/// Rolls the held last action forward K steps and returns the positions.
std::vector<Vec2> project_av(const VehicleState& current, const Action& last_action, int K,
                             double dt);

/// Constant-velocity Gaussian prediction. Velocity is the finite difference of
/// the two most recent valid samples (zero with a single sample); the standard
/// deviation at step k is sigma0 + k * growth.
PredictorOutput constant_velocity_predict(const PredictorInput& input, double sigma0,
                                          double growth);

/// Returns the replayed future as the prediction. Frames where a pedestrian is
/// absent hold its last known position; pedestrians missing from the whole
/// horizon get a stationary track with `fallback` set.
PredictorOutput ground_truth_predict(const Scenario& scenario, std::span<const AgentId> ped_ids,
                                     double time, int K, double dt, double sigma_gt);

/// Checks ids, horizon length and positive definiteness against the request
/// and returns the tracks in request order. Throws PredictorError.
PredictorOutput validate_prediction(const PredictorInput& input, PredictorOutput output);

class ConstantVelocityPredictor final : public Predictor {
 public:
  ConstantVelocityPredictor(double sigma0, double growth) : sigma0_(sigma0), growth_(growth) {}
  PredictorOutput predict(const PredictorInput& input) override;
  std::string name() const override { return "cv"; }

 private:
  double sigma0_;
  double growth_;
};

class GroundTruthPredictor final : public Predictor {
 public:
  explicit GroundTruthPredictor(double sigma_gt) : sigma_gt_(sigma_gt) {}
  PredictorOutput predict(const PredictorInput& input) override;
  std::string name() const override { return "gt"; }

 private:
  double sigma_gt_;
};

// Forwards requests over the predictor wire schema to another process.
// Requests on one instance are serialized on its connection.
class ExternalPredictor final : public Predictor {
 public:
  ExternalPredictor(std::string endpoint, std::chrono::milliseconds timeout);
  explicit ExternalPredictor(std::unique_ptr<LineChannel> channel,
                             std::chrono::milliseconds timeout = std::chrono::seconds(5));
  ~ExternalPredictor() override;

  PredictorOutput predict(const PredictorInput& input) override;
  std::string name() const override { return "external:" + endpoint_; }

 private:
  std::string endpoint_;
  std::unique_ptr<LineChannel> channel_;
  std::chrono::milliseconds timeout_;
};

PredictorOutput external_predict(const PredictorInput& input, LineChannel& channel,
                                 std::chrono::milliseconds timeout);

/// "cv", "gt" or "external:<endpoint>".
PredictorFactory make_predictor_factory(const std::string& spec, const Config& cfg);

/// Answers predictor requests on `channel` with `predictor` until EOF.
void serve_predictor(LineChannel& channel, Predictor& predictor);

}  // namespace crowdnav
