#include "crowdnav/serialization.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "crowdnav/error.hpp"

namespace crowdnav {

using nlohmann::json;

namespace {

// Visits every tunable Config field as (group, name, ref). group is empty for
// top-level fields.
template <typename C, typename F>
void visit_config(C& c, F&& f) {
  f("", "dt", c.dt);
  f("", "v_max", c.v_max);
  f("", "v_min", c.v_min);
  f("", "dtheta_rate_max", c.dtheta_rate_max);
  f("", "ped_radius", c.ped_radius);
  f("", "av_radius", c.av_radius);
  f("", "personal_space", c.personal_space);
  f("", "sensor_range", c.sensor_range);
  f("", "delta", c.delta);
  f("", "r_g", c.r_g);
  f("", "r_c", c.r_c);
  f("", "K", c.K);
  f("", "H", c.H);
  f("", "timeout_margin", c.timeout_margin);
  f("", "gamma", c.gamma);
  f("", "w_theta", c.w_theta);
  f("", "w_back", c.w_back);
  f("", "speed_dependent_danger", c.speed_dependent_danger);
  f("", "goal_radius", c.goal_radius);
  f("", "loss_weight", c.loss_weight);
  f("", "min_frames", c.min_frames);
  f("predictor", "sigma0", c.predictor.sigma0);
  f("predictor", "growth", c.predictor.growth);
  f("predictor", "sigma_gt", c.predictor.sigma_gt);
  f("predictor", "timeout_s", c.predictor.timeout_s);
  f("mpc", "q_v", c.mpc.q_v);
  f("mpc", "q_dtheta", c.mpc.q_dtheta);
  f("mpc", "q_p", c.mpc.q_p);
  f("mpc", "q_ed", c.mpc.q_ed);
  f("mpc", "q_slack", c.mpc.q_slack);
  f("mpc", "slack_bound", c.mpc.slack_bound);
  f("cem", "samples", c.cem.samples);
  f("cem", "elites", c.cem.elites);
  f("cem", "iterations", c.cem.iterations);
  f("cem", "seed", c.cem.seed);
}

std::string qualified(const char* group, const char* name) {
  return group[0] ? std::string(group) + "." + name : std::string(name);
}

void read_field(const json& v, double& out, const std::string& name) {
  if (!v.is_number()) throw ParseError("config field '" + name + "' must be a number");
  out = v.get<double>();
}

void read_field(const json& v, bool& out, const std::string& name) {
  if (!v.is_boolean()) throw ParseError("config field '" + name + "' must be a boolean");
  out = v.get<bool>();
}

template <typename Int>
void read_integer(const json& v, Int& out, const std::string& name) {
  if (v.is_number_integer()) {
    if constexpr (std::is_unsigned_v<Int>) {
      if (v.is_number_unsigned() || v.get<std::int64_t>() >= 0) {
        out = v.get<Int>();
        return;
      }
    } else {
      out = v.get<Int>();
      return;
    }
  } else if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isfinite(d) && d == std::floor(d) && (!std::is_unsigned_v<Int> || d >= 0)) {
      out = static_cast<Int>(d);
      return;
    }
  }
  throw ParseError("config field '" + name + "' must be an integer");
}

void read_field(const json& v, int& out, const std::string& name) { read_integer(v, out, name); }
void read_field(const json& v, std::uint64_t& out, const std::string& name) {
  read_integer(v, out, name);
}

const json& require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("missing field '") + key + "'");
  return *it;
}

double get_number(const json& j, const char* key) {
  const json& v = require(j, key);
  if (!v.is_number()) throw ParseError(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

}  // namespace

void to_json(json& j, const Config& cfg) {
  j = json::object();
  visit_config(cfg, [&](const char* group, const char* name, const auto& value) {
    if (group[0]) {
      j[group][name] = value;
    } else {
      j[name] = value;
    }
  });
}

void from_json(const json& j, Config& cfg) {
  if (!j.is_object()) throw ParseError("config must be a JSON object");
  std::map<std::string, const json*> given;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.value().is_object()) {
      for (auto inner = it.value().begin(); inner != it.value().end(); ++inner) {
        given[it.key() + "." + inner.key()] = &inner.value();
      }
    } else {
      given[it.key()] = &it.value();
    }
  }
  visit_config(cfg, [&](const char* group, const char* name, auto& value) {
    const std::string key = qualified(group, name);
    auto it = given.find(key);
    if (it == given.end()) return;
    read_field(*it->second, value, key);
    given.erase(it);
  });
  if (!given.empty()) throw ParseError("unknown config field '" + given.begin()->first + "'");
}

void to_json(json& j, const Gaussian2D& g) {
  j = json{{"mx", g.mean.x()}, {"my", g.mean.y()}, {"sxx", g.sxx()}, {"sxy", g.sxy()},
           {"syy", g.syy()}};
}

void from_json(const json& j, Gaussian2D& g) {
  g = Gaussian2D::from_triple(get_number(j, "mx"), get_number(j, "my"), get_number(j, "sxx"),
                              get_number(j, "sxy"), get_number(j, "syy"));
}

void to_json(json& j, const VehicleState& s) {
  j = json{{"px", s.position.x()}, {"py", s.position.y()}, {"vx", s.velocity.x()},
           {"vy", s.velocity.y()}, {"theta", s.theta},     {"v", s.speed()},
           {"radius", s.radius},   {"v_pref", s.v_pref},   {"gx", s.goal.x()},
           {"gy", s.goal.y()}};
}

void from_json(const json& j, VehicleState& s) {
  s.position = Vec2(get_number(j, "px"), get_number(j, "py"));
  s.velocity = Vec2(get_number(j, "vx"), get_number(j, "vy"));
  s.theta = get_number(j, "theta");
  s.radius = get_number(j, "radius");
  s.v_pref = get_number(j, "v_pref");
  s.goal = Vec2(get_number(j, "gx"), get_number(j, "gy"));
}

void to_json(json& j, const PredictedTrack& track) {
  j = json{{"id", track.ped_id}, {"fallback", track.fallback}, {"steps", track.steps}};
}

void from_json(const json& j, PredictedTrack& track) {
  track.ped_id = require(j, "id").get<AgentId>();
  track.fallback = j.value("fallback", false);
  track.steps = require(j, "steps").get<std::vector<Gaussian2D>>();
}

void to_json(json& j, const JointObservation& obs) {
  json peds = json::array();
  for (const auto& p : obs.peds) {
    peds.push_back({{"id", p.id},
                    {"px", p.position.x()},
                    {"py", p.position.y()},
                    {"fallback", p.track.fallback},
                    {"pred", p.track.steps}});
  }
  j = json{{"t", obs.t}, {"av", obs.av}, {"peds", std::move(peds)}};
}

void from_json(const json& j, JointObservation& obs) {
  obs.t = require(j, "t").get<int>();
  obs.av = require(j, "av").get<VehicleState>();
  obs.peds.clear();
  for (const auto& p : require(j, "peds")) {
    ObservedPedestrian op;
    op.id = require(p, "id").get<AgentId>();
    op.position = Vec2(get_number(p, "px"), get_number(p, "py"));
    op.track.ped_id = op.id;
    op.track.fallback = p.value("fallback", false);
    op.track.steps = require(p, "pred").get<std::vector<Gaussian2D>>();
    obs.peds.push_back(std::move(op));
  }
}

namespace {
const char* to_string(RewardBranch b) {
  switch (b) {
    case RewardBranch::goal: return "goal";
    case RewardBranch::collision: return "collision";
    case RewardBranch::danger: return "danger";
    case RewardBranch::regular: return "regular";
  }
  return "regular";
}
}  // namespace

void to_json(json& j, const RewardBreakdown& info) {
  j = json{{"branch", to_string(info.branch)}, {"r_progress", info.r_progress},
           {"r_pred", info.r_pred},            {"r_action", info.r_action},
           {"r_danger", info.r_danger},        {"danger", info.danger},
           {"d_min", number_or_null(info.d_min)}};
}

void to_json(json& j, const Scenario& s) {
  json ref = json::array();
  for (const auto& p : s.ego_reference) ref.push_back({p.x(), p.y()});
  json frames = json::array();
  for (const auto& frame : s.ped_frames) {
    json f = json::array();
    for (const auto& p : frame) {
      f.push_back({{"id", p.id}, {"x", p.position.x()}, {"y", p.position.y()}, {"radius", p.radius}});
    }
    frames.push_back(std::move(f));
  }
  j = json{{"schema_version", kScenarioSchemaVersion},
           {"id", s.id},
           {"fps", s.fps},
           {"time_budget", s.time_budget},
           {"ego_reference", std::move(ref)},
           {"ped_frames", std::move(frames)}};
}

void from_json(const json& j, Scenario& s) {
  const int version = require(j, "schema_version").get<int>();
  if (version != kScenarioSchemaVersion) {
    throw ParseError("unsupported scenario schema_version " + std::to_string(version));
  }
  s.id = require(j, "id").get<std::string>();
  s.fps = get_number(j, "fps");
  s.time_budget = get_number(j, "time_budget");
  s.ego_reference.clear();
  for (const auto& p : require(j, "ego_reference")) {
    if (!p.is_array() || p.size() != 2) throw ParseError("ego_reference entries must be [x, y]");
    s.ego_reference.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  s.ped_frames.clear();
  for (const auto& f : require(j, "ped_frames")) {
    std::vector<PedestrianState> frame;
    for (const auto& p : f) {
      frame.push_back({require(p, "id").get<AgentId>(), Vec2(get_number(p, "x"), get_number(p, "y")),
                       get_number(p, "radius")});
    }
    s.ped_frames.push_back(std::move(frame));
  }
}

void to_json(json& j, const EpisodeRecord& r) {
  json steps = json::array();
  for (const auto& s : r.steps) {
    steps.push_back({{"t", s.t},
                     {"av", s.av},
                     {"v", s.action.v},
                     {"dtheta", s.action.dtheta},
                     {"reward", s.reward},
                     {"d_min", number_or_null(s.d_min)},
                     {"intrusion", s.intrusion},
                     {"infeasible", s.infeasible},
                     {"planner_time_s", s.planner_time_s}});
  }
  j = json{{"schema_version", kRecordSchemaVersion},
           {"scenario_id", r.scenario_id},
           {"terminal_kind", to_string(r.terminal_kind)},
           {"path_length", r.path_length},
           {"nav_time", r.nav_time},
           {"error", r.error},
           {"steps", std::move(steps)}};
}

void from_json(const json& j, EpisodeRecord& r) {
  r.scenario_id = require(j, "scenario_id").get<std::string>();
  r.terminal_kind = terminal_kind_from_string(require(j, "terminal_kind").get<std::string>());
  r.path_length = get_number(j, "path_length");
  r.nav_time = get_number(j, "nav_time");
  r.error = j.value("error", std::string());
  r.steps.clear();
  for (const auto& s : require(j, "steps")) {
    StepLog log;
    log.t = require(s, "t").get<int>();
    log.av = require(s, "av").get<VehicleState>();
    log.action = {get_number(s, "v"), get_number(s, "dtheta")};
    log.reward = get_number(s, "reward");
    log.d_min = number_or_infinity(require(s, "d_min"));
    log.intrusion = s.value("intrusion", false);
    log.infeasible = s.value("infeasible", false);
    log.planner_time_s = s.value("planner_time_s", 0.0);
    r.steps.push_back(log);
  }
}

json number_or_null(double value) {
  return std::isfinite(value) ? json(value) : json(nullptr);
}

double number_or_infinity(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::infinity();
  if (!j.is_number()) throw ParseError("expected a number or null");
  return j.get<double>();
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

Config load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ParseError("config '" + path.string() + "': " + e.what());
  }
  Config cfg = j.get<Config>();
  validate(cfg);
  return cfg;
}

Scenario load_scenario(const std::filesystem::path& path) {
  Scenario s;
  try {
    s = json::parse(read_text(path)).get<Scenario>();
  } catch (const json::exception& e) {
    throw ParseError("scenario '" + path.string() + "': " + e.what());
  }
  s.validate();
  return s;
}

}  // namespace crowdnav
