#include <unistd.h>

#include <filesystem>
#include <thread>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "crowdnav/data.hpp"
#include "crowdnav/error.hpp"
#include "crowdnav/protocol.hpp"
#include "crowdnav/serialization.hpp"
#include "crowdnav/transport.hpp"

using namespace crowdnav;
using nlohmann::json;

namespace {

ScenarioCatalog small_catalog() {
  ScenarioCatalog c;
  const Config cfg;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto s = std::make_shared<const Scenario>(synth_scenario(SynthTemplate::crossing, 2, seed, cfg));
    c.scenarios[s->id] = s;
  }
  c.splits["test"] = {c.scenarios.begin()->first};
  return c;
}

PredictorFactory cv_factory() {
  return [] { return std::make_unique<ConstantVelocityPredictor>(0.1, 0.05); };
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("crowdnav_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST(EnvSession, Hello) {
  const auto catalog = small_catalog();
  EnvSession s(catalog, Config{}, cv_factory());
  const auto r = s.handle(json{{"type", "hello"}});
  EXPECT_EQ(r["type"], "hello");
  EXPECT_EQ(r["protocol_version"], kProtocolVersion);
  EXPECT_EQ(r["config"]["gamma"], 0.99);
  EXPECT_EQ(r["config"]["K"], 6);
  EXPECT_EQ(r["config"]["H"], 6);
  EXPECT_EQ(r["config"]["dt"], 0.5);
  EXPECT_EQ(r["action_space"]["v_min"], -1.0);
  EXPECT_EQ(r["action_space"]["v_max"], 4.167);
  EXPECT_DOUBLE_EQ(r["action_space"]["dtheta_max"].get<double>(), 0.1);
}

TEST(EnvSession, ListScenarios) {
  const auto catalog = small_catalog();
  EnvSession s(catalog, Config{}, cv_factory());
  EXPECT_EQ(s.handle(json{{"type", "list_scenarios"}})["ids"].size(), 3u);
  EXPECT_EQ(s.handle(json{{"type", "list_scenarios"}, {"split", "test"}})["ids"].size(), 1u);
  EXPECT_EQ(s.handle(json{{"type", "list_scenarios"}, {"split", "nope"}})["type"], "error");
}

TEST(EnvSession, ErrorsKeepSessionAlive) {
  const auto catalog = small_catalog();
  EnvSession s(catalog, Config{}, cv_factory());
  EXPECT_EQ(s.handle_line("{not json")["code"], "parse_error");
  EXPECT_EQ(s.handle(json::array())["code"], "bad_request");
  EXPECT_EQ(s.handle(json{{"type", "dance"}})["code"], "unknown_type");
  EXPECT_EQ(s.handle(json{{"type", "step"}, {"v", 1}, {"dtheta", 0}})["code"], "no_episode");
  EXPECT_EQ(s.handle(json{{"type", "reset"}, {"scenario_id", "nope"}})["code"], "unknown_scenario");
  const auto id = catalog.scenarios.begin()->first;
  EXPECT_EQ(s.handle(json{{"type", "reset"}, {"scenario_id", id}})["type"], "observation");
  EXPECT_EQ(s.handle(json{{"type", "step"}, {"v", "fast"}})["code"], "bad_request");
  EXPECT_EQ(s.handle(json{{"type", "step"}, {"v", 1.0}, {"dtheta", 0.0}})["type"], "step_result");
}

TEST(EnvSession, EpisodeToTerminalThenStepAfterDone) {
  const auto catalog = small_catalog();
  EnvSession s(catalog, Config{}, cv_factory());
  const auto id = catalog.scenarios.begin()->first;
  s.handle(json{{"type", "reset"}, {"scenario_id", id}});
  json r;
  for (int i = 0; i < 200; ++i) {
    r = s.handle(json{{"type", "step"}, {"v", 2.0}, {"dtheta", 0.0}});
    ASSERT_EQ(r["type"], "step_result");
    if (r["done"].get<bool>()) break;
  }
  EXPECT_TRUE(r["done"].get<bool>());
  EXPECT_NE(r["terminal_kind"], "running");
  EXPECT_TRUE(r["info"].contains("branch"));
  EXPECT_EQ(s.handle(json{{"type", "step"}, {"v", 2.0}, {"dtheta", 0.0}})["code"], "episode_done");
  EXPECT_EQ(s.finished().size(), 1u);
}

TEST(Serialization, ObservationRoundTrip) {
  const auto catalog = small_catalog();
  Environment env(Config{}, cv_factory()());
  env.reset(catalog.scenarios.begin()->second);
  JointObservation obs = env.observation();
  for (int i = 0; i < 30 && obs.peds.empty() && !env.done(); ++i) obs = env.step({1.3, 0.01}).obs;
  ASSERT_FALSE(obs.peds.empty());
  const std::string text = json(obs).dump();
  const auto back = json::parse(text).get<JointObservation>();
  EXPECT_EQ(json(back).dump(), text);
  EXPECT_EQ(back.av.position, obs.av.position);
  EXPECT_EQ(back.peds[0].track.steps[3].cov, obs.peds[0].track.steps[3].cov);
}

TEST(Serialization, ScenarioAndRecordRoundTrip) {
  const auto s = synth_scenario(SynthTemplate::head_on, 3, 5, Config{});
  const auto back = json(s).get<Scenario>();
  EXPECT_EQ(json(back).dump(), json(s).dump());
  json bad = json(s);
  bad["schema_version"] = 99;
  EXPECT_THROW(bad.get<Scenario>(), ParseError);

  Environment env(Config{}, cv_factory()());
  env.reset(std::make_shared<const Scenario>(s));
  for (int i = 0; i < 5; ++i) env.step({2.0, 0.0});
  const auto rec = json(env.record()).get<EpisodeRecord>();
  EXPECT_EQ(json(rec).dump(), json(env.record()).dump());
}

TEST(Serialization, ConfigDefaultsAndUnknownKeys) {
  const auto cfg = json::parse(R"({"r_g": 100, "mpc": {"q_p": 2}})").get<Config>();
  EXPECT_EQ(cfg.r_g, 100.0);
  EXPECT_EQ(cfg.mpc.q_p, 2.0);
  EXPECT_EQ(cfg.K, 6);
  EXPECT_THROW(json::parse(R"({"rg": 1})").get<Config>(), ParseError);
  EXPECT_THROW(json::parse(R"({"mpc": {"qp": 1}})").get<Config>(), ParseError);
  EXPECT_THROW(json::parse(R"({"K": "six"})").get<Config>(), ParseError);
  const Config d;
  EXPECT_EQ(json(json(d).get<Config>()).dump(), json(d).dump());
}

TEST(Serialization, NonFiniteAsNull) {
  EXPECT_TRUE(number_or_null(std::numeric_limits<double>::infinity()).is_null());
  EXPECT_TRUE(std::isinf(number_or_infinity(json(nullptr))));
  EXPECT_EQ(number_or_infinity(json(1.5)), 1.5);
}

TEST(PredictorWire, RequestRoundTrip) {
  PredictorInput in;
  in.t = 4;
  in.K = 3;
  in.dt = 0.5;
  VehicleState av;
  av.position = Vec2(1.25, -2.5);
  av.theta = 0.3;
  av.velocity = 2.0 * Vec2(std::cos(0.3), std::sin(0.3));
  in.av_history = {av, av};
  in.av_projection = {Vec2(1, 2), Vec2(3, 4), Vec2(5, 6)};
  in.peds.push_back({11, {std::nullopt, Vec2(0.1, 0.2)}});
  const auto req = predictor_request(in);
  EXPECT_EQ(req["H"], 2);
  const auto back = predictor_input_from_request(json::parse(req.dump()));
  EXPECT_EQ(back.t, 4);
  EXPECT_EQ(back.K, 3);
  EXPECT_EQ(back.av_projection, in.av_projection);
  EXPECT_FALSE(back.peds[0].positions[0].has_value());
  EXPECT_EQ(*back.peds[0].positions[1], Vec2(0.1, 0.2));
  EXPECT_EQ(back.av_history[1].position, av.position);
  EXPECT_NEAR(back.av_history[1].speed(), 2.0, 1e-12);
  EXPECT_THROW(predictor_input_from_request(json{{"type", "predict"}}), ProtocolError);
  EXPECT_THROW(predictor_output_from_reply(json{{"type", "error"}, {"message", "x"}}), ProtocolError);
}

TEST(Transport, TcpSessionEndToEnd) {
  const auto catalog = small_catalog();
  TcpListener listener("127.0.0.1", 0);
  std::thread server([&] {
    auto ch = listener.accept();
    serve_session(*ch, catalog, Config{}, cv_factory(), std::nullopt, 0);
  });
  {
    auto client = connect_endpoint("127.0.0.1:" + std::to_string(listener.port()));
    client->write_line(R"({"type":"hello"})");
    EXPECT_EQ(json::parse(*client->read_line(std::chrono::seconds(5)))["type"], "hello");
    client->write_line(json{{"type", "reset"}, {"scenario_id", catalog.scenarios.begin()->first}}.dump());
    EXPECT_EQ(json::parse(*client->read_line(std::chrono::seconds(5)))["type"], "observation");
    client->write_line("garbage");
    EXPECT_EQ(json::parse(*client->read_line(std::chrono::seconds(5)))["type"], "error");
    client->write_line(R"({"type":"step","v":1,"dtheta":0})");
    EXPECT_EQ(json::parse(*client->read_line(std::chrono::seconds(5)))["type"], "step_result");
  }
  server.join();
}

TEST(Transport, ReadTimeout) {
  TcpListener listener("127.0.0.1", 0);
  auto client = connect_endpoint("tcp:127.0.0.1:" + std::to_string(listener.port()));
  auto server_side = listener.accept();
  EXPECT_THROW(client->read_line(std::chrono::milliseconds(50)), TransportError);
  server_side.reset();
  EXPECT_FALSE(client->read_line(std::chrono::seconds(1)).has_value());
}

TEST(Transport, EndpointParsing) {
  EXPECT_EQ(parse_bind("7777"), (std::pair<std::string, std::uint16_t>{"127.0.0.1", 7777}));
  EXPECT_EQ(parse_bind("0.0.0.0:80"), (std::pair<std::string, std::uint16_t>{"0.0.0.0", 80}));
  EXPECT_THROW(parse_bind("host:99999"), InvalidArgument);
  EXPECT_THROW(connect_endpoint("nowhere"), InvalidArgument);
  EXPECT_THROW(connect_endpoint("tcp:127.0.0.1:1"), TransportError);
}

TEST(Transport, SubprocessPredictor) {
  const std::string endpoint = std::string("cmd:") + CROWDNAV_CLI + " serve-predictor --stdio";
  ExternalPredictor remote(endpoint, std::chrono::seconds(10));
  PredictorInput in;
  in.K = 6;
  in.peds.push_back({1, {Vec2(0, 0), Vec2(0.5, 0.1)}});
  const auto got = remote.predict(in);
  const auto want = constant_velocity_predict(in, 0.1, 0.05);
  for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(got.tracks[0].steps[k].mean, want.tracks[0].steps[k].mean);
}

TEST(Catalog, LoadsDirectoryAndSplits) {
  const auto dir = temp_dir("catalog");
  const Config cfg;
  std::filesystem::create_directories(dir / "scenarios");
  for (std::uint64_t seed = 0; seed < 2; ++seed) {
    const auto s = synth_scenario(SynthTemplate::head_on, 1, seed, cfg);
    write_text(dir / "scenarios" / (s.id + ".json"), json(s).dump());
  }
  write_text(dir / "split.json",
             json{{"splits", {{"train", {"head_on_n1_s0"}}, {"test", {"head_on_n1_s1"}}}}}.dump());
  const auto c = load_catalog(dir);
  EXPECT_EQ(c.scenarios.size(), 2u);
  EXPECT_EQ(split_ids(c, "test"), std::vector<std::string>{"head_on_n1_s1"});
  EXPECT_EQ(split_ids(c, "all").size(), 2u);
  EXPECT_THROW(split_ids(c, "val"), InvalidArgument);
  write_text(dir / "split.json", json{{"splits", {{"train", {"ghost"}}}}}.dump());
  EXPECT_THROW(load_catalog(dir), InvalidArgument);
  EXPECT_THROW(load_catalog(dir / "missing"), InvalidArgument);
  std::filesystem::remove_all(dir);
}
