#include "crowdnav/predictor.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "crowdnav/error.hpp"
#include "crowdnav/protocol.hpp"
#include "crowdnav/scenario.hpp"
#include "crowdnav/transport.hpp"

namespace crowdnav {

std::vector<Vec2> project_av(const VehicleState& current, const Action& last_action, int K,
                             double dt) {
  std::vector<Vec2> positions;
  positions.reserve(static_cast<std::size_t>(std::max(K, 0)));
  VehicleState state = current;
  for (int k = 0; k < K; ++k) {
    state = unicycle_step(state, last_action, dt);
    positions.push_back(state.position);
  }
  return positions;
}

PredictorOutput constant_velocity_predict(const PredictorInput& input, double sigma0,
                                          double growth) {
  PredictorOutput out;
  out.tracks.reserve(input.peds.size());
  for (const auto& ped : input.peds) {
    const auto& h = ped.positions;
    int last = -1;
    int prev = -1;
    for (int i = static_cast<int>(h.size()) - 1; i >= 0; --i) {
      if (!h[static_cast<std::size_t>(i)]) continue;
      if (last < 0) {
        last = i;
      } else {
        prev = i;
        break;
      }
    }
    if (last < 0) {
      throw PredictorError("constant-velocity predictor: pedestrian " + std::to_string(ped.id) +
                           " has an empty history");
    }
    const Vec2 p_last = *h[static_cast<std::size_t>(last)];
    Vec2 velocity = Vec2::Zero();
    if (prev >= 0) {
      velocity = (p_last - *h[static_cast<std::size_t>(prev)]) / ((last - prev) * input.dt);
    }
    // Steps elapsed between the last valid sample and the current time.
    const int lag = static_cast<int>(h.size()) - 1 - last;

    PredictedTrack track;
    track.ped_id = ped.id;
    track.steps.reserve(static_cast<std::size_t>(input.K));
    for (int k = 1; k <= input.K; ++k) {
      const Vec2 mean = p_last + (k + lag) * input.dt * velocity;
      track.steps.push_back(Gaussian2D::isotropic(mean, sigma0 + k * growth));
    }
    out.tracks.push_back(std::move(track));
  }
  return out;
}

PredictorOutput ground_truth_predict(const Scenario& scenario, std::span<const AgentId> ped_ids,
                                     double time, int K, double dt, double sigma_gt) {
  PredictorOutput out;
  out.tracks.reserve(ped_ids.size());
  for (AgentId id : ped_ids) {
    std::optional<Vec2> known = scenario.pedestrian_position(id, time);
    std::vector<std::optional<Vec2>> future;
    future.reserve(static_cast<std::size_t>(K));
    bool any_future = false;
    for (int k = 1; k <= K; ++k) {
      future.push_back(scenario.pedestrian_position(id, time + k * dt));
      any_future = any_future || future.back().has_value();
    }
    if (!known) {
      auto first = std::find_if(future.begin(), future.end(), [](const auto& p) { return p.has_value(); });
      if (first == future.end()) {
        throw PredictorError("ground-truth predictor: pedestrian " + std::to_string(id) +
                             " is not in the replay at t=" + std::to_string(time));
      }
      known = *first;
    }
    PredictedTrack track;
    track.ped_id = id;
    track.fallback = !any_future;
    for (const auto& p : future) {
      if (p) known = p;
      track.steps.push_back(Gaussian2D::isotropic(*known, sigma_gt));
    }
    out.tracks.push_back(std::move(track));
  }
  return out;
}

PredictorOutput validate_prediction(const PredictorInput& input, PredictorOutput output) {
  if (output.tracks.size() != input.peds.size()) {
    throw PredictorError("prediction has " + std::to_string(output.tracks.size()) +
                         " tracks for " + std::to_string(input.peds.size()) + " pedestrians");
  }
  std::map<AgentId, std::size_t> by_id;
  for (std::size_t i = 0; i < output.tracks.size(); ++i) {
    if (!by_id.emplace(output.tracks[i].ped_id, i).second) {
      throw PredictorError("prediction repeats pedestrian " +
                           std::to_string(output.tracks[i].ped_id));
    }
  }
  PredictorOutput aligned;
  aligned.tracks.reserve(input.peds.size());
  for (const auto& ped : input.peds) {
    auto it = by_id.find(ped.id);
    if (it == by_id.end()) {
      throw PredictorError("prediction is missing pedestrian " + std::to_string(ped.id));
    }
    PredictedTrack& track = output.tracks[it->second];
    if (static_cast<int>(track.steps.size()) != input.K) {
      throw PredictorError("track for pedestrian " + std::to_string(ped.id) + " has " +
                           std::to_string(track.steps.size()) + " steps, expected " +
                           std::to_string(input.K));
    }
    for (std::size_t k = 0; k < track.steps.size(); ++k) {
      if (!is_positive_definite(track.steps[k])) {
        throw PredictorError("track for pedestrian " + std::to_string(ped.id) + " step " +
                             std::to_string(k + 1) + " has a non positive definite covariance");
      }
    }
    aligned.tracks.push_back(std::move(track));
  }
  return aligned;
}

PredictorOutput ConstantVelocityPredictor::predict(const PredictorInput& input) {
  return constant_velocity_predict(input, sigma0_, growth_);
}

PredictorOutput GroundTruthPredictor::predict(const PredictorInput& input) {
  if (input.replay.scenario == nullptr) {
    throw PredictorError("ground-truth predictor needs replay access");
  }
  std::vector<AgentId> ids;
  ids.reserve(input.peds.size());
  for (const auto& ped : input.peds) ids.push_back(ped.id);
  return ground_truth_predict(*input.replay.scenario, ids, input.replay.time, input.K, input.dt,
                              sigma_gt_);
}

ExternalPredictor::ExternalPredictor(std::string endpoint, std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), channel_(connect_endpoint(endpoint_)), timeout_(timeout) {}

ExternalPredictor::ExternalPredictor(std::unique_ptr<LineChannel> channel,
                                     std::chrono::milliseconds timeout)
    : endpoint_("channel"), channel_(std::move(channel)), timeout_(timeout) {}

ExternalPredictor::~ExternalPredictor() = default;

PredictorOutput ExternalPredictor::predict(const PredictorInput& input) {
  return external_predict(input, *channel_, timeout_);
}

PredictorOutput external_predict(const PredictorInput& input, LineChannel& channel,
                                 std::chrono::milliseconds timeout) {
  std::optional<std::string> line;
  try {
    channel.write_line(predictor_request(input).dump());
    line = channel.read_line(timeout);
  } catch (const TransportError& e) {
    throw PredictorError(std::string("external predictor: ") + e.what());
  }
  if (!line) throw PredictorError("external predictor closed the connection");

  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(*line);
  } catch (const nlohmann::json::exception& e) {
    throw PredictorError(std::string("external predictor sent malformed JSON: ") + e.what());
  }
  PredictorOutput output;
  try {
    output = predictor_output_from_reply(reply);
  } catch (const ProtocolError& e) {
    throw PredictorError(std::string("external predictor: ") + e.what());
  }
  return validate_prediction(input, std::move(output));
}

PredictorFactory make_predictor_factory(const std::string& spec, const Config& cfg) {
  const PredictorSettings s = cfg.predictor;
  if (spec == "cv") {
    return [s] { return std::make_unique<ConstantVelocityPredictor>(s.sigma0, s.growth); };
  }
  if (spec == "gt") {
    return [s] { return std::make_unique<GroundTruthPredictor>(s.sigma_gt); };
  }
  const std::string prefix = "external:";
  if (spec.rfind(prefix, 0) == 0 && spec.size() > prefix.size()) {
    const std::string endpoint = spec.substr(prefix.size());
    const auto timeout = std::chrono::milliseconds(static_cast<long>(s.timeout_s * 1000.0));
    return [endpoint, timeout] { return std::make_unique<ExternalPredictor>(endpoint, timeout); };
  }
  throw InvalidArgument("unknown predictor '" + spec + "' (expected cv, gt or external:<endpoint>)");
}

void serve_predictor(LineChannel& channel, Predictor& predictor) {
  while (auto line = channel.read_line()) {
    if (line->empty()) continue;
    nlohmann::json reply;
    try {
      const auto request = nlohmann::json::parse(*line);
      if (request.value("type", "") != "predict") {
        throw ProtocolError("expected a predict request");
      }
      reply = predictor_reply(predictor.predict(predictor_input_from_request(request)));
    } catch (const nlohmann::json::exception& e) {
      reply = error_reply("bad_request", e.what());
    } catch (const Error& e) {
      reply = error_reply("predict_failed", e.what());
    }
    channel.write_line(reply.dump());
  }
}

}  // namespace crowdnav
