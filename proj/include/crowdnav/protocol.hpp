#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crowdnav/env.hpp"
#include "crowdnav/predictor.hpp"

namespace crowdnav {

class LineChannel;

inline constexpr int kProtocolVersion = 1;

struct ScenarioCatalog {
  std::map<std::string, std::shared_ptr<const Scenario>> scenarios;
  std::map<std::string, std::vector<std::string>> splits;  // split name -> ids
};

/// Loads every scenario JSON under `dir/scenarios` and the split manifest
/// `dir/split.json` when present.
ScenarioCatalog load_catalog(const std::filesystem::path& dir);

/// Ids of a split; "all" (or empty) lists every scenario in id order.
std::vector<std::string> split_ids(const ScenarioCatalog& catalog, const std::string& split);

// Environment wire protocol, one message per line:
//   {type:"hello"}                      -> {type:"hello", protocol_version, config, action_space}
//   {type:"list_scenarios", split?}     -> {type:"scenarios", split, ids}
//   {type:"reset", scenario_id}         -> {type:"observation", observation}
//   {type:"step", v, dtheta}            -> {type:"step_result", observation, reward, done,
//                                           terminal_kind, info}
// Malformed requests get {type:"error", code, message}; the session survives.
class EnvSession {
 public:
  EnvSession(const ScenarioCatalog& catalog, Config cfg, PredictorFactory predictor);

  nlohmann::json handle(const nlohmann::json& request);
  nlohmann::json handle_line(const std::string& line);

  /// Records of episodes that reached a terminal state in this session.
  const std::vector<EpisodeRecord>& finished() const { return finished_; }

 private:
  nlohmann::json hello() const;

  const ScenarioCatalog& catalog_;
  Config cfg_;
  PredictorFactory predictor_;
  std::unique_ptr<Environment> env_;
  std::vector<EpisodeRecord> finished_;
};

nlohmann::json error_reply(const std::string& code, const std::string& message);

/// Runs a session until the peer closes the channel. Finished episode records
/// are written under `record_dir` when set.
void serve_session(LineChannel& channel, const ScenarioCatalog& catalog, const Config& cfg,
                   const PredictorFactory& predictor,
                   const std::optional<std::filesystem::path>& record_dir, int session_id);

nlohmann::json predictor_request(const PredictorInput& input);
PredictorInput predictor_input_from_request(const nlohmann::json& request);
nlohmann::json predictor_reply(const PredictorOutput& output);
PredictorOutput predictor_output_from_reply(const nlohmann::json& reply);

}  // namespace crowdnav
