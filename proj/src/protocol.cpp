#include "crowdnav/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "crowdnav/error.hpp"
#include "crowdnav/serialization.hpp"
#include "crowdnav/transport.hpp"

namespace crowdnav {

using nlohmann::json;

ScenarioCatalog load_catalog(const std::filesystem::path& dir) {
  const auto scenario_dir = dir / "scenarios";
  if (!std::filesystem::is_directory(scenario_dir)) {
    throw InvalidArgument("no scenarios directory under '" + dir.string() + "'");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(scenario_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  ScenarioCatalog catalog;
  for (const auto& file : files) {
    auto scenario = std::make_shared<const Scenario>(load_scenario(file));
    const std::string id = scenario->id;
    if (!catalog.scenarios.emplace(id, std::move(scenario)).second) {
      throw InvalidArgument("duplicate scenario id '" + id + "' in " + file.string());
    }
  }
  if (catalog.scenarios.empty()) {
    throw InvalidArgument("no scenario files under '" + scenario_dir.string() + "'");
  }

  const auto split_file = dir / "split.json";
  if (std::filesystem::exists(split_file)) {
    json manifest;
    try {
      manifest = json::parse(read_text(split_file));
    } catch (const json::exception& e) {
      throw ParseError("split manifest '" + split_file.string() + "': " + e.what());
    }
    const auto& splits = manifest.at("splits");
    for (auto it = splits.begin(); it != splits.end(); ++it) {
      std::vector<std::string> ids = it.value().get<std::vector<std::string>>();
      for (const auto& id : ids) {
        if (!catalog.scenarios.count(id)) {
          throw InvalidArgument("split '" + it.key() + "' names unknown scenario '" + id + "'");
        }
      }
      catalog.splits[it.key()] = std::move(ids);
    }
  }
  return catalog;
}

std::vector<std::string> split_ids(const ScenarioCatalog& catalog, const std::string& split) {
  if (split.empty() || split == "all") {
    std::vector<std::string> ids;
    for (const auto& [id, s] : catalog.scenarios) ids.push_back(id);
    return ids;
  }
  auto it = catalog.splits.find(split);
  if (it == catalog.splits.end()) throw InvalidArgument("unknown split '" + split + "'");
  return it->second;
}

json error_reply(const std::string& code, const std::string& message) {
  return json{{"type", "error"}, {"code", code}, {"message", message}};
}

EnvSession::EnvSession(const ScenarioCatalog& catalog, Config cfg, PredictorFactory predictor)
    : catalog_(catalog), cfg_(std::move(cfg)), predictor_(std::move(predictor)) {}

json EnvSession::hello() const {
  return json{{"type", "hello"},
              {"protocol_version", kProtocolVersion},
              {"config", cfg_},
              {"action_space",
               {{"v_min", cfg_.v_min}, {"v_max", cfg_.v_max}, {"dtheta_max", cfg_.dtheta_step_max()}}}};
}

json EnvSession::handle_line(const std::string& line) {
  json request;
  try {
    request = json::parse(line);
  } catch (const json::parse_error& e) {
    return error_reply("parse_error", e.what());
  }
  return handle(request);
}

json EnvSession::handle(const json& request) {
  if (!request.is_object() || !request.contains("type") || !request["type"].is_string()) {
    return error_reply("bad_request", "request must be an object with a string 'type'");
  }
  const std::string type = request["type"].get<std::string>();

  if (type == "hello") return hello();

  if (type == "list_scenarios") {
    std::string split = "all";
    if (request.contains("split")) {
      if (!request["split"].is_string()) return error_reply("bad_request", "'split' must be a string");
      split = request["split"].get<std::string>();
    }
    try {
      return json{{"type", "scenarios"}, {"split", split}, {"ids", split_ids(catalog_, split)}};
    } catch (const InvalidArgument& e) {
      return error_reply("unknown_split", e.what());
    }
  }

  if (type == "reset") {
    if (!request.contains("scenario_id") || !request["scenario_id"].is_string()) {
      return error_reply("bad_request", "reset needs a string 'scenario_id'");
    }
    const std::string id = request["scenario_id"].get<std::string>();
    auto it = catalog_.scenarios.find(id);
    if (it == catalog_.scenarios.end()) {
      return error_reply("unknown_scenario", "no scenario '" + id + "'");
    }
    try {
      env_ = std::make_unique<Environment>(cfg_, predictor_());
      const auto& obs = env_->reset(it->second);
      return json{{"type", "observation"}, {"observation", obs}};
    } catch (const Error& e) {
      env_.reset();
      return error_reply("predictor_failed", e.what());
    }
  }

  if (type == "step") {
    if (!env_) return error_reply("no_episode", "step before reset");
    if (env_->done()) return error_reply("episode_done", "episode already terminated; send reset");
    const auto v = request.find("v");
    const auto dtheta = request.find("dtheta");
    if (v == request.end() || dtheta == request.end() || !v->is_number() || !dtheta->is_number()) {
      return error_reply("bad_request", "step needs numeric 'v' and 'dtheta'");
    }
    try {
      const StepOutcome out = env_->step({v->get<double>(), dtheta->get<double>()});
      if (out.done) finished_.push_back(env_->record());
      return json{{"type", "step_result"},
                  {"observation", out.obs},
                  {"reward", out.reward},
                  {"done", out.done},
                  {"terminal_kind", to_string(out.terminal_kind)},
                  {"info", out.info}};
    } catch (const InvalidAction& e) {
      return error_reply("bad_request", e.what());
    } catch (const Error& e) {
      env_.reset();
      return error_reply("predictor_failed", e.what());
    }
  }

  return error_reply("unknown_type", "unknown request type '" + type + "'");
}

void serve_session(LineChannel& channel, const ScenarioCatalog& catalog, const Config& cfg,
                   const PredictorFactory& predictor,
                   const std::optional<std::filesystem::path>& record_dir, int session_id) {
  EnvSession session(catalog, cfg, predictor);
  std::size_t written = 0;
  try {
    while (auto line = channel.read_line()) {
      if (line->empty()) continue;
      channel.write_line(session.handle_line(*line).dump());
      if (record_dir) {
        for (; written < session.finished().size(); ++written) {
          const auto& rec = session.finished()[written];
          const auto name = "session" + std::to_string(session_id) + "_" + std::to_string(written) +
                            "_" + rec.scenario_id + ".json";
          write_text(*record_dir / name, json(rec).dump(2) + "\n");
        }
      }
    }
  } catch (const TransportError& e) {
    std::cerr << "session " << session_id << ": " << e.what() << "\n";
  }
}

json predictor_request(const PredictorInput& input) {
  json av_history = json::array();
  for (const auto& s : input.av_history) {
    av_history.push_back({{"px", s.position.x()}, {"py", s.position.y()}, {"theta", s.theta},
                          {"v", s.speed()}});
  }
  json projection = json::array();
  for (const auto& p : input.av_projection) projection.push_back({p.x(), p.y()});
  json peds = json::array();
  for (const auto& ped : input.peds) {
    json history = json::array();
    for (const auto& p : ped.positions) {
      history.push_back(p ? json{p->x(), p->y()} : json(nullptr));
    }
    peds.push_back({{"id", ped.id}, {"history", std::move(history)}});
  }
  return json{{"type", "predict"},
              {"t", input.t},
              {"H", input.av_history.size()},
              {"K", input.K},
              {"dt", input.dt},
              {"av_history", std::move(av_history)},
              {"av_projection", std::move(projection)},
              {"peds", std::move(peds)}};
}

namespace {

Vec2 point(const json& p) {
  if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
    throw ProtocolError("expected a point [x, y]");
  }
  return Vec2(p[0].get<double>(), p[1].get<double>());
}

}  // namespace

PredictorInput predictor_input_from_request(const json& request) {
  try {
    PredictorInput input;
    input.t = request.at("t").get<int>();
    input.K = request.at("K").get<int>();
    input.dt = request.at("dt").get<double>();
    for (const auto& s : request.at("av_history")) {
      VehicleState v;
      v.position = Vec2(s.at("px").get<double>(), s.at("py").get<double>());
      v.theta = s.at("theta").get<double>();
      const double speed = s.at("v").get<double>();
      v.velocity = speed * Vec2(std::cos(v.theta), std::sin(v.theta));
      input.av_history.push_back(v);
    }
    for (const auto& p : request.at("av_projection")) input.av_projection.push_back(point(p));
    for (const auto& ped : request.at("peds")) {
      PedestrianHistory h;
      h.id = ped.at("id").get<AgentId>();
      for (const auto& p : ped.at("history")) {
        h.positions.push_back(p.is_null() ? std::nullopt : std::optional<Vec2>(point(p)));
      }
      input.peds.push_back(std::move(h));
    }
    if (input.K < 1) throw ProtocolError("K must be >= 1");
    return input;
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed predict request: ") + e.what());
  }
}

json predictor_reply(const PredictorOutput& output) {
  json tracks = json::array();
  for (const auto& t : output.tracks) tracks.push_back({{"id", t.ped_id}, {"steps", t.steps}});
  return json{{"type", "tracks"}, {"tracks", std::move(tracks)}};
}

PredictorOutput predictor_output_from_reply(const json& reply) {
  try {
    const std::string type = reply.at("type").get<std::string>();
    if (type == "error") {
      throw ProtocolError("peer reported error: " + reply.value("message", std::string("?")));
    }
    if (type != "tracks") throw ProtocolError("expected a tracks reply, got '" + type + "'");
    PredictorOutput output;
    for (const auto& t : reply.at("tracks")) {
      PredictedTrack track;
      track.ped_id = t.at("id").get<AgentId>();
      track.steps = t.at("steps").get<std::vector<Gaussian2D>>();
      output.tracks.push_back(std::move(track));
    }
    return output;
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed tracks reply: ") + e.what());
  } catch (const ParseError& e) {
    throw ProtocolError(std::string("malformed tracks reply: ") + e.what());
  }
}

}  // namespace crowdnav
