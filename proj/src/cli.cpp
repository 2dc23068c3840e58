#include "crowdnav/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "crowdnav/data.hpp"
#include "crowdnav/error.hpp"
#include "crowdnav/eval.hpp"
#include "crowdnav/protocol.hpp"
#include "crowdnav/serialization.hpp"
#include "crowdnav/transport.hpp"

namespace crowdnav {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;  // name=value
};

void add_config_options(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "JSON config file (falls back to $NAV_CONFIG)");
  cmd->add_option("--set", o.overrides, "Override a config field, e.g. --set mpc.q_p=5");
}

Config resolve_config(const CommonOptions& o) {
  std::string path = o.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("NAV_CONFIG")) path = env;
  }
  Config cfg = path.empty() ? Config{} : load_config(path);
  for (const auto& item : o.overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw InvalidArgument("--set expects name=value, got '" + item + "'");
    const std::string value = item.substr(eq + 1);
    double v = 0.0;
    if (value == "true" || value == "false") {
      v = value == "true" ? 1.0 : 0.0;
    } else {
      const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (value.empty() || ec != std::errc() || ptr != value.data() + value.size()) {
        throw InvalidArgument("--set " + item + ": value is not a number");
      }
    }
    cfg = with_parameter(cfg, item.substr(0, eq), v);
  }
  validate(cfg);
  return cfg;
}

std::string num(double v) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : ""; }

std::vector<std::shared_ptr<const Scenario>> select(const ScenarioCatalog& catalog,
                                                    const std::string& split) {
  std::vector<std::shared_ptr<const Scenario>> out;
  for (const auto& id : split_ids(catalog, split)) out.push_back(catalog.scenarios.at(id));
  if (out.empty()) throw InvalidArgument("split '" + split + "' is empty");
  return out;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json split_manifest(const ScenarioSplit& split, const SplitSpec& spec, std::uint64_t seed,
                    const std::vector<DroppedVehicle>& dropped) {
  auto ids = [](const std::vector<Scenario>& v) {
    std::vector<std::string> out;
    for (const auto& s : v) out.push_back(s.id);
    return out;
  };
  json drop = json::array();
  for (const auto& d : dropped) drop.push_back({{"id", d.id}, {"reason", d.reason}});
  return json{{"schema_version", kScenarioSchemaVersion},
              {"seed", seed},
              {"fractions", {{"train", spec.train}, {"test", spec.test}, {"val", spec.val}}},
              {"splits", {{"train", ids(split.train)}, {"test", ids(split.test)}, {"val", ids(split.val)}}},
              {"dropped", std::move(drop)}};
}

void write_scenario_set(const fs::path& out, const ScenarioSplit& split, const json& manifest,
                        const Config& cfg) {
  fs::create_directories(out / "scenarios");
  for (const auto* part : {&split.train, &split.test, &split.val}) {
    for (const auto& s : *part) write_json(out / "scenarios" / (s.id + ".json"), json(s));
  }
  write_json(out / "split.json", manifest);
  write_json(out / "config.json", json(cfg));
}

SplitSpec parse_fractions(const std::vector<double>& f) {
  if (f.empty()) return {};
  if (f.size() != 3) throw InvalidArgument("--fractions expects three values: train test val");
  SplitSpec spec{f[0], f[1], f[2]};
  spec.validate();
  return spec;
}

// ---- extract ---------------------------------------------------------------

struct ExtractOptions {
  CommonOptions common;
  std::string input;
  std::string out;
  std::uint64_t seed = 0;
  double fps = 2.0;
  std::vector<double> fractions;
};

int cmd_extract(const ExtractOptions& o) {
  const Config cfg = resolve_config(o.common);
  if (!fs::exists(o.input)) throw InvalidArgument("input file '" + o.input + "' does not exist");
  const SplitSpec spec = parse_fractions(o.fractions);
  const auto table = parse_table(o.input, o.fps);
  auto extraction = extract_scenarios(table, cfg);
  for (const auto& d : extraction.dropped) {
    std::cerr << "dropped vehicle " << d.id << ": " << d.reason << "\n";
  }
  const auto split = split_scenarios(std::move(extraction.scenarios), spec, o.seed);
  write_scenario_set(o.out, split, split_manifest(split, spec, o.seed, extraction.dropped), cfg);
  std::cerr << "wrote " << split.train.size() + split.test.size() + split.val.size()
            << " scenarios to " << o.out << "\n";
  return 0;
}

// ---- synth -----------------------------------------------------------------

struct SynthCliOptions {
  CommonOptions common;
  std::string kind = "crossing";
  int count = 5;
  int peds = 1;
  std::string out;
  std::uint64_t seed = 0;
  SynthOptions synth;
  std::vector<double> fractions;
};

int cmd_synth(const SynthCliOptions& o) {
  const Config cfg = resolve_config(o.common);
  const SplitSpec spec = parse_fractions(o.fractions);
  if (o.count < 1) throw InvalidArgument("--count must be >= 1");
  std::vector<Scenario> scenarios;
  for (int i = 0; i < o.count; ++i) {
    scenarios.push_back(synth_scenario(synth_template_from_string(o.kind), o.peds,
                                       o.seed + static_cast<std::uint64_t>(i), cfg, o.synth));
  }
  const auto split = split_scenarios(std::move(scenarios), spec, o.seed);
  write_scenario_set(o.out, split, split_manifest(split, spec, o.seed, {}), cfg);
  return 0;
}

// ---- run -------------------------------------------------------------------

struct RunOptions {
  CommonOptions common;
  std::string scenarios;
  std::string split = "all";
  std::string planner = "mpc_md";
  std::string predictor = "cv";
  std::string out;
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

std::string trajectory_csv(const EpisodeResult& ep, const Config& cfg) {
  std::ostringstream out;
  out << "step,time,agent,id,k,x,y,sxx,sxy,syy\n";
  for (std::size_t i = 0; i < ep.observations.size(); ++i) {
    const auto& obs = ep.observations[i];
    const std::string head = std::to_string(obs.t) + "," + num(obs.t * cfg.dt) + ",";
    out << head << "av,0,0," << num(obs.av.position.x()) << ',' << num(obs.av.position.y())
        << ",,,\n";
    for (const auto& p : obs.peds) {
      out << head << "ped," << p.id << ",0," << num(p.position.x()) << ',' << num(p.position.y())
          << ",,,\n";
      for (std::size_t k = 0; k < p.track.steps.size(); ++k) {
        const auto& g = p.track.steps[k];
        out << head << "ped," << p.id << ',' << k + 1 << ',' << num(g.mean.x()) << ','
            << num(g.mean.y()) << ',' << num(g.sxx()) << ',' << num(g.sxy()) << ','
            << num(g.syy()) << '\n';
      }
    }
  }
  return out.str();
}

std::string metrics_csv(const Evaluation& ev, const Config& cfg) {
  std::ostringstream out;
  out << "scenario_id,terminal_kind,nav_time,path_length,intrusion_ratio,intrusion_distance,"
         "intrusion_speed,steps,infeasible_steps,compute_time,error\n";
  for (const auto& ep : ev.episodes) {
    const auto& r = ep.record;
    if (!r.error.empty() || r.steps.empty()) {
      std::string err = r.error;
      for (char& c : err) {
        if (c == ',' || c == '\n') c = ' ';
      }
      out << r.scenario_id << ",error,,,,,," << r.steps.size() << ",,," << err << '\n';
      continue;
    }
    const auto m = episode_metrics(r, cfg);
    out << m.scenario_id << ',' << to_string(m.terminal_kind) << ',' << num(m.nav_time) << ','
        << num(m.path_length) << ',' << num(m.intrusion_ratio) << ','
        << opt_num(m.intrusion_distance) << ',' << opt_num(m.intrusion_speed) << ',' << m.steps
        << ',' << m.infeasible_steps << ',' << num(m.compute_time_sum / static_cast<double>(m.steps))
        << ",\n";
  }
  return out.str();
}

int cmd_run(const RunOptions& o) {
  Config cfg = resolve_config(o.common);
  if (o.seed) cfg.cem.seed = *o.seed;
  const auto catalog = load_catalog(o.scenarios);
  const auto scenarios = select(catalog, o.split);
  const auto planner = make_planner_factory(o.planner, cfg);
  const auto predictor = make_predictor_factory(o.predictor, cfg);

  // Fail fast when an external endpoint is unreachable.
  try {
    planner();
  } catch (const Error& e) {
    std::cerr << "crowdnav run: cannot start planner '" << o.planner << "': " << e.what() << "\n";
    return 3;
  }
  try {
    predictor();
  } catch (const Error& e) {
    std::cerr << "crowdnav run: cannot start predictor '" << o.predictor << "': " << e.what()
              << "\n";
    return 3;
  }

  const Evaluation ev = evaluate(scenarios, planner, predictor, cfg, o.threads, true);

  const fs::path out(o.out);
  fs::create_directories(out);
  write_json(out / "config.json", json(cfg));
  std::vector<std::string> ids;
  for (const auto& s : scenarios) ids.push_back(s->id);
  write_json(out / "manifest.json", json{{"schema_version", kRecordSchemaVersion},
                                         {"scenarios", o.scenarios},
                                         {"split", o.split},
                                         {"planner", o.planner},
                                         {"predictor", o.predictor},
                                         {"seed", cfg.cem.seed},
                                         {"scenario_ids", ids}});
  for (const auto& ep : ev.episodes) {
    write_json(out / "episodes" / (ep.record.scenario_id + ".json"), json(ep.record));
    write_text(out / "trajectories" / (ep.record.scenario_id + ".csv"), trajectory_csv(ep, cfg));
  }
  write_text(out / "metrics.csv", metrics_csv(ev, cfg));
  if (!ev.rows.empty()) {
    write_text(out / "report.csv", emit_report(ev.report, ReportFormat::csv, o.planner));
    write_text(out / "report.md", emit_report(ev.report, ReportFormat::markdown, o.planner));
    std::cout << emit_report(ev.report, ReportFormat::markdown, o.planner);
  }
  if (ev.errors > 0) {
    for (const auto& ep : ev.episodes) {
      if (!ep.record.error.empty()) {
        std::cerr << "episode " << ep.record.scenario_id << " failed: " << ep.record.error << "\n";
      }
    }
    return 1;
  }
  return 0;
}

// ---- serve -----------------------------------------------------------------

struct ServeOptions {
  CommonOptions common;
  std::string scenarios;
  std::string bind = "127.0.0.1:7777";
  std::string predictor = "cv";
  std::string out;
  bool stdio = false;
  int max_sessions = 0;
};

int cmd_serve(const ServeOptions& o) {
  const Config cfg = resolve_config(o.common);
  const auto catalog = load_catalog(o.scenarios);
  const auto predictor = make_predictor_factory(o.predictor, cfg);
  std::optional<fs::path> record_dir;
  if (!o.out.empty()) {
    record_dir = fs::path(o.out) / "sessions";
    fs::create_directories(*record_dir);
    write_json(fs::path(o.out) / "config.json", json(cfg));
  }
  if (o.stdio) {
    auto channel = stdio_channel();
    serve_session(*channel, catalog, cfg, predictor, record_dir, 0);
    return 0;
  }
  const auto [host, port] = parse_bind(o.bind);
  TcpListener listener(host, port);
  std::cerr << "listening on " << host << ":" << listener.port() << std::endl;
  std::vector<std::thread> sessions;
  for (int id = 0; o.max_sessions <= 0 || id < o.max_sessions; ++id) {
    auto channel = listener.accept();
    if (!channel) break;
    sessions.emplace_back([&, id, ch = std::move(channel)]() mutable {
      serve_session(*ch, catalog, cfg, predictor, record_dir, id);
    });
  }
  for (auto& t : sessions) t.join();
  return 0;
}

// ---- serve-predictor -------------------------------------------------------

struct ServePredictorOptions {
  CommonOptions common;
  std::string predictor = "cv";
  std::string bind = "127.0.0.1:7778";
  bool stdio = false;
  int max_sessions = 0;
};

int cmd_serve_predictor(const ServePredictorOptions& o) {
  const Config cfg = resolve_config(o.common);
  const auto factory = make_predictor_factory(o.predictor, cfg);
  if (o.stdio) {
    auto channel = stdio_channel();
    auto model = factory();
    serve_predictor(*channel, *model);
    return 0;
  }
  const auto [host, port] = parse_bind(o.bind);
  TcpListener listener(host, port);
  std::cerr << "listening on " << host << ":" << listener.port() << std::endl;
  std::vector<std::thread> sessions;
  for (int id = 0; o.max_sessions <= 0 || id < o.max_sessions; ++id) {
    auto channel = listener.accept();
    if (!channel) break;
    sessions.emplace_back([&factory, ch = std::move(channel)]() mutable {
      try {
        auto model = factory();
        serve_predictor(*ch, *model);
      } catch (const Error& e) {
        std::cerr << "predictor session: " << e.what() << "\n";
      }
    });
  }
  for (auto& t : sessions) t.join();
  return 0;
}

// ---- score-predictor -------------------------------------------------------

struct ScoreOptions {
  CommonOptions common;
  std::string scenarios;
  std::string split = "all";
  std::string predictor = "cv";
  std::string out;
};

std::string fixed3(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v + 0.0, std::chars_format::fixed, 3);
  std::string s(buf, res.ptr);
  return s == "-0.000" ? "0.000" : s;
}

int cmd_score_predictor(const ScoreOptions& o) {
  const Config cfg = resolve_config(o.common);
  const auto catalog = load_catalog(o.scenarios);
  const auto scenarios = select(catalog, o.split);
  const auto report = score_predictor(scenarios, make_predictor_factory(o.predictor, cfg), cfg);

  std::ostringstream csv;
  csv << "model,ade,fde,nll,desv_1,desv_2,desv_3,pairs\n"
      << o.predictor << ',' << fixed3(report.ade) << ',' << fixed3(report.fde) << ','
      << fixed3(report.nll) << ',' << fixed3(report.desv[0]) << ',' << fixed3(report.desv[1]) << ','
      << fixed3(report.desv[2]) << ',' << report.pairs << '\n';
  std::ostringstream md;
  md << "| Model | ADE (m) | FDE (m) | NLL | dESV_1 | dESV_2 | dESV_3 |\n"
     << "|---|---|---|---|---|---|---|\n"
     << "| " << o.predictor << " | " << fixed3(report.ade) << " | " << fixed3(report.fde) << " | "
     << fixed3(report.nll) << " | " << fixed3(report.desv[0]) << " | " << fixed3(report.desv[1])
     << " | " << fixed3(report.desv[2]) << " |\n";
  if (!o.out.empty()) {
    write_text(fs::path(o.out) / "calibration.csv", csv.str());
    write_text(fs::path(o.out) / "calibration.md", md.str());
    write_json(fs::path(o.out) / "config.json", json(cfg));
  }
  std::cout << md.str();
  return 0;
}

// ---- sweep -----------------------------------------------------------------

struct SweepOptions {
  CommonOptions common;
  std::string scenarios;
  std::string split = "all";
  std::string planner = "mpc_md";
  std::string predictor = "cv";
  std::string param;
  std::vector<double> values;
  std::string out;
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

int cmd_sweep(const SweepOptions& o) {
  Config cfg = resolve_config(o.common);
  if (o.seed) cfg.cem.seed = *o.seed;
  const auto catalog = load_catalog(o.scenarios);
  const auto scenarios = select(catalog, o.split);
  const auto reports =
      sensitivity_sweep(o.param, o.values, o.planner, o.predictor, scenarios, cfg, o.threads);
  std::vector<LabeledReport> rows;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    rows.push_back({o.param + "=" + num(o.values[i]), reports[i]});
  }
  if (!o.out.empty()) {
    write_text(fs::path(o.out) / "sweep.csv", emit_report(rows, ReportFormat::csv));
    write_text(fs::path(o.out) / "sweep.md", emit_report(rows, ReportFormat::markdown));
    write_json(fs::path(o.out) / "config.json", json(cfg));
  }
  std::cout << emit_report(rows, ReportFormat::markdown);
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Crowd navigation among replayed pedestrians"};
  app.require_subcommand(1);

  ExtractOptions ex;
  auto* extract = app.add_subcommand("extract", "Build scenarios and a split manifest from a CSV");
  add_config_options(extract, ex.common);
  extract->add_option("input", ex.input, "Trajectory CSV (frame,agent_id,agent_type,x,y)")->required();
  extract->add_option("--out", ex.out, "Output directory")->required();
  extract->add_option("--seed", ex.seed, "Split seed");
  extract->add_option("--fps", ex.fps, "Frame rate of the table");
  extract->add_option("--fractions", ex.fractions, "train test val fractions")->expected(3);

  SynthCliOptions sy;
  auto* synth = app.add_subcommand("synth", "Generate synthetic scenarios");
  add_config_options(synth, sy.common);
  synth->add_option("--template", sy.kind, "crossing | head_on | static_crowd | dense_ring");
  synth->add_option("--count", sy.count, "Number of scenarios");
  synth->add_option("--peds", sy.peds, "Pedestrians per scenario");
  synth->add_option("--seed", sy.seed, "Base seed");
  synth->add_option("--length", sy.synth.length, "Reference length (m)");
  synth->add_option("--speed", sy.synth.reference_speed, "Reference speed (m/s)");
  synth->add_option("--ring-radius", sy.synth.ring_radius, "dense_ring radius (m)");
  synth->add_option("--fractions", sy.fractions, "train test val fractions")->expected(3);
  synth->add_option("--out", sy.out, "Output directory")->required();

  RunOptions ru;
  auto* run = app.add_subcommand("run", "Evaluate a planner on a scenario split");
  add_config_options(run, ru.common);
  run->add_option("--scenarios", ru.scenarios, "Directory written by extract or synth")->required();
  run->add_option("--split", ru.split, "train | test | val | all");
  run->add_option("--planner", ru.planner,
                  "mpc_ed_hard | mpc_ed_soft | mpc_md | scripted[:mode] | external:<endpoint>");
  run->add_option("--predictor", ru.predictor, "cv | gt | external:<endpoint>");
  run->add_option("--out", ru.out, "Output directory")->required();
  run->add_option("--seed", ru.seed, "Planner sampling seed");
  run->add_option("--threads", ru.threads, "Episodes evaluated concurrently");

  ServeOptions se;
  auto* serve = app.add_subcommand("serve", "Serve the environment protocol");
  add_config_options(serve, se.common);
  serve->add_option("--scenarios", se.scenarios, "Scenario directory")->required();
  serve->add_option("--bind", se.bind, "host:port to listen on");
  serve->add_option("--predictor", se.predictor, "cv | gt | external:<endpoint>");
  serve->add_option("--out", se.out, "Directory for per-session records");
  serve->add_flag("--stdio", se.stdio, "Serve one session on stdin/stdout");
  serve->add_option("--max-sessions", se.max_sessions, "Exit after this many sessions (0 = never)");

  ServePredictorOptions sp;
  auto* serve_pred = app.add_subcommand("serve-predictor", "Serve a predictor over the wire schema");
  add_config_options(serve_pred, sp.common);
  serve_pred->add_option("--predictor", sp.predictor, "cv");
  serve_pred->add_option("--bind", sp.bind, "host:port to listen on");
  serve_pred->add_flag("--stdio", sp.stdio, "Serve on stdin/stdout");
  serve_pred->add_option("--max-sessions", sp.max_sessions, "Exit after this many sessions");

  ScoreOptions sc;
  auto* score = app.add_subcommand("score-predictor", "Score a predictor against replayed futures");
  add_config_options(score, sc.common);
  score->add_option("--scenarios", sc.scenarios, "Scenario directory")->required();
  score->add_option("--split", sc.split, "train | test | val | all");
  score->add_option("--predictor", sc.predictor, "cv | gt | external:<endpoint>");
  score->add_option("--out", sc.out, "Output directory");

  SweepOptions sw;
  auto* sweep = app.add_subcommand("sweep", "Re-run an evaluation over values of one parameter");
  add_config_options(sweep, sw.common);
  sweep->add_option("--scenarios", sw.scenarios, "Scenario directory")->required();
  sweep->add_option("--split", sw.split, "train | test | val | all");
  sweep->add_option("--planner", sw.planner, "Planner spec");
  sweep->add_option("--predictor", sw.predictor, "Predictor spec");
  sweep->add_option("--param", sw.param, "Config field, e.g. r_g or mpc.q_p")->required();
  sweep->add_option("--values", sw.values, "Values to try")->required();
  sweep->add_option("--out", sw.out, "Output directory");
  sweep->add_option("--seed", sw.seed, "Planner sampling seed");
  sweep->add_option("--threads", sw.threads, "Episodes evaluated concurrently");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (extract->parsed()) return cmd_extract(ex);
    if (synth->parsed()) return cmd_synth(sy);
    if (run->parsed()) return cmd_run(ru);
    if (serve->parsed()) return cmd_serve(se);
    if (serve_pred->parsed()) return cmd_serve_predictor(sp);
    if (score->parsed()) return cmd_score_predictor(sc);
    if (sweep->parsed()) return cmd_sweep(sw);
  } catch (const std::exception& e) {
    std::cerr << "crowdnav: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace crowdnav
