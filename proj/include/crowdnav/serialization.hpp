#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "crowdnav/env.hpp"
#include "crowdnav/mpc.hpp"
#include "crowdnav/scenario.hpp"
#include "crowdnav/uncertainty.hpp"

namespace crowdnav {

inline constexpr int kScenarioSchemaVersion = 1;
inline constexpr int kRecordSchemaVersion = 1;

// Keys absent from the input keep their defaults; unknown keys are rejected.
void to_json(nlohmann::json& j, const Config& cfg);
void from_json(const nlohmann::json& j, Config& cfg);

void to_json(nlohmann::json& j, const Gaussian2D& g);  // {mx,my,sxx,sxy,syy}
void from_json(const nlohmann::json& j, Gaussian2D& g);

void to_json(nlohmann::json& j, const VehicleState& s);
void from_json(const nlohmann::json& j, VehicleState& s);

void to_json(nlohmann::json& j, const PredictedTrack& track);
void from_json(const nlohmann::json& j, PredictedTrack& track);

void to_json(nlohmann::json& j, const JointObservation& obs);
void from_json(const nlohmann::json& j, JointObservation& obs);

void to_json(nlohmann::json& j, const RewardBreakdown& info);

void to_json(nlohmann::json& j, const Scenario& scenario);
void from_json(const nlohmann::json& j, Scenario& scenario);

void to_json(nlohmann::json& j, const EpisodeRecord& record);
void from_json(const nlohmann::json& j, EpisodeRecord& record);

/// Non-finite values (e.g. d_min with nobody around) serialize as null.
nlohmann::json number_or_null(double value);
double number_or_infinity(const nlohmann::json& j);

Config load_config(const std::filesystem::path& path);
Scenario load_scenario(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace crowdnav
