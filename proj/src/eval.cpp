#include "crowdnav/eval.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>
#include <tuple>

#include "crowdnav/error.hpp"
#include "crowdnav/serialization.hpp"

namespace crowdnav {

EpisodeMetrics episode_metrics(const EpisodeRecord& record, const Config& cfg) {
  if (record.steps.empty()) {
    throw InvalidArgument("episode_metrics: record '" + record.scenario_id + "' has no steps");
  }
  EpisodeMetrics m;
  m.scenario_id = record.scenario_id;
  m.terminal_kind = record.terminal_kind;
  m.nav_time = record.nav_time;
  m.path_length = record.path_length;
  m.steps = record.steps.size();
  std::size_t intrusions = 0;
  for (const auto& s : record.steps) {
    if (s.infeasible) ++m.infeasible_steps;
    m.compute_time_sum += s.planner_time_s;
    m.compute_time_sq_sum += s.planner_time_s * s.planner_time_s;
    if (s.d_min >= 0.0 && s.d_min < cfg.personal_space) {
      ++intrusions;
      if (!m.intrusion_distance || s.d_min < *m.intrusion_distance) {
        m.intrusion_distance = s.d_min;
        m.intrusion_speed = s.av.speed();
      }
    }
  }
  m.intrusion_ratio = 100.0 * static_cast<double>(intrusions) / static_cast<double>(m.steps);
  return m;
}

namespace {

std::optional<MeanStd> mean_std(const std::vector<double>& values) {
  if (values.empty()) return std::nullopt;
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return MeanStd{mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

auto sort_key(const EpisodeMetrics& m) {
  return std::make_tuple(m.scenario_id, static_cast<int>(m.terminal_kind), m.nav_time,
                         m.path_length, m.intrusion_ratio, m.steps, m.compute_time_sum);
}

}  // namespace

AggregateReport aggregate(std::span<const EpisodeMetrics> input) {
  if (input.empty()) throw InvalidArgument("aggregate: no episodes");
  std::vector<EpisodeMetrics> rows(input.begin(), input.end());
  std::sort(rows.begin(), rows.end(),
            [](const EpisodeMetrics& a, const EpisodeMetrics& b) { return sort_key(a) < sort_key(b); });

  AggregateReport r;
  r.episodes = rows.size();
  std::size_t goals = 0, collisions = 0, timeouts = 0;
  std::vector<double> nav, path, ratio, dist, speed;
  double ct_sum = 0.0, ct_sq = 0.0;
  std::size_t ct_n = 0;
  for (const auto& m : rows) {
    switch (m.terminal_kind) {
      case TerminalKind::goal:
        ++goals;
        nav.push_back(m.nav_time);
        path.push_back(m.path_length);
        break;
      case TerminalKind::collision: ++collisions; break;
      case TerminalKind::timeout: ++timeouts; break;
      case TerminalKind::running:
        throw InvalidArgument("aggregate: episode '" + m.scenario_id + "' did not terminate");
    }
    ratio.push_back(m.intrusion_ratio);
    if (m.intrusion_distance) dist.push_back(*m.intrusion_distance);
    if (m.intrusion_speed) speed.push_back(*m.intrusion_speed);
    ct_sum += m.compute_time_sum;
    ct_sq += m.compute_time_sq_sum;
    ct_n += m.steps;
  }
  const double n = static_cast<double>(rows.size());
  r.success = static_cast<double>(goals) / n;
  r.collision = static_cast<double>(collisions) / n;
  r.timeout = static_cast<double>(timeouts) / n;
  r.nav_time = mean_std(nav);
  r.path_length = mean_std(path);
  r.intrusion_ratio = mean_std(ratio);
  r.intrusion_distance = mean_std(dist);
  r.intrusion_speed = mean_std(speed);
  if (ct_n > 0) {
    const double mean = ct_sum / static_cast<double>(ct_n);
    const double var = std::max(0.0, ct_sq / static_cast<double>(ct_n) - mean * mean);
    r.compute_time = MeanStd{mean, std::sqrt(var)};
  }
  return r;
}

namespace {

std::string fixed2(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v + 0.0, std::chars_format::fixed, 2);
  std::string s(buf, res.ptr);
  if (s == "-0.00") s = "0.00";
  return s;
}

const char* kMetricColumns[] = {"nav_time", "path_length", "intrusion_ratio",
                                "intrusion_distance", "intrusion_speed", "compute_time"};
const char* kMarkdownHeader[] = {"Nav. time (s)", "Path length (m)", "Intrusion ratio (%)",
                                 "Intrusion dist. (m)", "Intrusion speed (m/s)",
                                 "Compute time (s/step)"};

template <typename R>
auto metric_cells(R& r) {
  return std::array{&r.nav_time,           &r.path_length,     &r.intrusion_ratio,
                    &r.intrusion_distance, &r.intrusion_speed, &r.compute_time};
}

}  // namespace

std::string emit_report(std::span<const LabeledReport> reports, ReportFormat format) {
  std::ostringstream out;
  if (format == ReportFormat::csv) {
    out << "model,success,collision,timeout";
    for (const char* c : kMetricColumns) out << ',' << c << ',' << c << "_std";
    out << ",episodes\n";
    for (const auto& [label, r] : reports) {
      out << label << ',' << fixed2(r.success) << ',' << fixed2(r.collision) << ','
          << fixed2(r.timeout);
      for (const auto* cell : metric_cells(r)) {
        if (*cell) {
          out << ',' << fixed2((*cell)->mean) << ',' << fixed2((*cell)->std);
        } else {
          out << ",-,-";
        }
      }
      out << ',' << r.episodes << '\n';
    }
  } else {
    out << "| Model | Success | Collision | Timeout";
    for (const char* h : kMarkdownHeader) out << " | " << h;
    out << " |\n|---|---|---|---";
    for (std::size_t i = 0; i < std::size(kMarkdownHeader); ++i) out << "|---";
    out << "|\n";
    for (const auto& [label, r] : reports) {
      out << "| " << label << " | " << fixed2(r.success) << " | " << fixed2(r.collision) << " | "
          << fixed2(r.timeout);
      for (const auto* cell : metric_cells(r)) {
        out << " | ";
        if (*cell) {
          out << fixed2((*cell)->mean) << " ± " << fixed2((*cell)->std);
        } else {
          out << '-';
        }
      }
      out << " |\n";
    }
  }
  return out.str();
}

std::string emit_report(const AggregateReport& report, ReportFormat format,
                        const std::string& label) {
  const LabeledReport one{label, report};
  return emit_report(std::span<const LabeledReport>(&one, 1), format);
}

std::vector<LabeledReport> parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("report csv is empty");
  const std::size_t expected = 4 + 2 * std::size(kMetricColumns) + 1;

  auto number = [](const std::string& field, std::size_t line_no) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
      throw ParseError("report line " + std::to_string(line_no) + ": bad number '" + field + "'");
    }
    return v;
  };

  std::vector<LabeledReport> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != expected) {
      throw ParseError("report line " + std::to_string(line_no) + ": expected " +
                       std::to_string(expected) + " fields");
    }
    LabeledReport lr;
    lr.label = f[0];
    lr.report.success = number(f[1], line_no);
    lr.report.collision = number(f[2], line_no);
    lr.report.timeout = number(f[3], line_no);
    auto cells = metric_cells(lr.report);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto& mean = f[4 + 2 * i];
      const auto& sd = f[5 + 2 * i];
      auto& cell = *cells[i];
      if (mean == "-" && sd == "-") {
        cell.reset();
      } else {
        cell = MeanStd{number(mean, line_no), number(sd, line_no)};
      }
    }
    lr.report.episodes = static_cast<std::size_t>(number(f.back(), line_no));
    out.push_back(std::move(lr));
  }
  return out;
}

EpisodeResult run_episode(std::shared_ptr<const Scenario> scenario, Planner& planner,
                          std::unique_ptr<Predictor> predictor, const Config& cfg,
                          bool keep_observations) {
  EpisodeResult result;
  result.record.scenario_id = scenario ? scenario->id : std::string();
  std::optional<Environment> env;
  try {
    env.emplace(cfg, std::move(predictor));
    planner.reset();
    const JointObservation& first = env->reset(std::move(scenario));
    if (keep_observations) result.observations.push_back(first);
    while (!env->done()) {
      const auto t0 = std::chrono::steady_clock::now();
      const PlannerDecision decision = planner.act(env->observation());
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      StepOutcome out = env->step(decision.action, {elapsed, decision.infeasible});
      if (keep_observations) result.observations.push_back(std::move(out.obs));
    }
    result.record = env->record();
  } catch (const PredictorError& e) {
    if (env) result.record = env->record();
    result.record.error = std::string("predictor_error: ") + e.what();
  } catch (const TransportError& e) {
    if (env) result.record = env->record();
    result.record.error = std::string("planner_error: ") + e.what();
  } catch (const ProtocolError& e) {
    if (env) result.record = env->record();
    result.record.error = std::string("planner_error: ") + e.what();
  } catch (const Error& e) {
    if (env) result.record = env->record();
    result.record.error = std::string("error: ") + e.what();
  }
  return result;
}

Evaluation evaluate(std::span<const std::shared_ptr<const Scenario>> scenarios,
                    const PlannerFactory& planner, const PredictorFactory& predictor,
                    const Config& cfg, int threads, bool keep_observations) {
  Evaluation ev;
  ev.episodes.resize(scenarios.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < scenarios.size(); i = next++) {
      try {
        auto p = planner();
        ev.episodes[i] = run_episode(scenarios[i], *p, predictor(), cfg, keep_observations);
      } catch (const Error& e) {
        ev.episodes[i].record.scenario_id = scenarios[i] ? scenarios[i]->id : std::string();
        ev.episodes[i].record.error = std::string("setup_error: ") + e.what();
      }
    }
  };
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min<int>(threads, static_cast<int>(std::max<std::size_t>(1, scenarios.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (const auto& ep : ev.episodes) {
    if (!ep.record.error.empty() || ep.record.steps.empty()) {
      ++ev.errors;
      continue;
    }
    ev.rows.push_back(episode_metrics(ep.record, cfg));
  }
  if (!ev.rows.empty()) ev.report = aggregate(ev.rows);
  return ev;
}

Config with_parameter(const Config& cfg, const std::string& param_name, double value) {
  nlohmann::json j = cfg;
  nlohmann::json* slot = nullptr;
  const auto dot = param_name.find('.');
  if (dot == std::string::npos) {
    if (j.contains(param_name) && !j[param_name].is_object()) slot = &j[param_name];
  } else {
    const auto group = param_name.substr(0, dot);
    const auto name = param_name.substr(dot + 1);
    if (j.contains(group) && j[group].is_object() && j[group].contains(name)) slot = &j[group][name];
  }
  if (!slot) throw InvalidArgument("unknown configuration parameter '" + param_name + "'");
  if (slot->is_boolean()) {
    *slot = value != 0.0;
  } else {
    *slot = value;
  }
  Config out;
  try {
    out = j.get<Config>();
  } catch (const ParseError& e) {
    throw InvalidArgument("cannot set '" + param_name + "': " + e.what());
  }
  validate(out);
  return out;
}

std::vector<AggregateReport> sensitivity_sweep(
    const std::string& param_name, std::span<const double> values, const std::string& planner,
    const std::string& predictor, std::span<const std::shared_ptr<const Scenario>> scenarios,
    const Config& cfg, int threads) {
  if (values.empty()) throw InvalidArgument("sensitivity_sweep: no values");
  if (scenarios.empty()) throw InvalidArgument("sensitivity_sweep: no scenarios");
  std::vector<Config> configs;
  for (double v : values) configs.push_back(with_parameter(cfg, param_name, v));

  std::vector<AggregateReport> reports;
  for (const auto& c : configs) {
    const auto ev = evaluate(scenarios, make_planner_factory(planner, c),
                             make_predictor_factory(predictor, c), c, threads);
    if (ev.rows.empty()) {
      throw Error("sensitivity_sweep: every episode failed for " + param_name);
    }
    reports.push_back(ev.report);
  }
  return reports;
}

}  // namespace crowdnav

namespace crowdnav {

CalibrationReport score_predictor(std::span<const std::shared_ptr<const Scenario>> scenarios,
                                  const PredictorFactory& predictor, const Config& cfg) {
  validate(cfg);
  auto model = predictor();
  std::vector<std::vector<Vec2>> truth;
  std::vector<PredictedTrack> tracks;
  const double dt = cfg.dt;
  for (const auto& scenario : scenarios) {
    const double duration = scenario->reference_duration();
    for (int j = cfg.H - 1; (j + cfg.K) * dt <= duration + 1e-9; ++j) {
      const double now = j * dt;
      PredictorInput input;
      input.t = j;
      input.dt = dt;
      input.K = cfg.K;
      input.replay = {scenario.get(), now};
      std::vector<std::vector<Vec2>> futures;
      for (const auto& ped : scenario->pedestrians_at(now)) {
        PedestrianHistory h;
        h.id = ped.id;
        bool complete = true;
        for (int i = cfg.H - 1; i >= 0 && complete; --i) {
          auto p = scenario->pedestrian_position(ped.id, now - i * dt);
          complete = p.has_value();
          h.positions.push_back(p);
        }
        std::vector<Vec2> future;
        for (int k = 1; k <= cfg.K && complete; ++k) {
          auto p = scenario->pedestrian_position(ped.id, now + k * dt);
          complete = p.has_value();
          if (p) future.push_back(*p);
        }
        if (!complete) continue;
        input.peds.push_back(std::move(h));
        futures.push_back(std::move(future));
      }
      if (input.peds.empty()) continue;

      // Ego context from the recorded drive.
      for (int i = cfg.H - 1; i >= 0; --i) {
        const double t = now - i * dt;
        const auto at = [&](double time) {
          const double f = std::clamp(time * scenario->fps, 0.0,
                                      static_cast<double>(scenario->frame_count() - 1));
          const auto lo = static_cast<std::size_t>(std::floor(f));
          const auto hi = std::min(lo + 1, scenario->frame_count() - 1);
          const double a = f - static_cast<double>(lo);
          return Vec2((1.0 - a) * scenario->ego_reference[lo] + a * scenario->ego_reference[hi]);
        };
        VehicleState s;
        s.position = at(t);
        s.velocity = (at(t) - at(t - dt)) / dt;
        s.theta = s.velocity.norm() > 1e-9 ? std::atan2(s.velocity.y(), s.velocity.x()) : 0.0;
        s.radius = cfg.av_radius;
        s.v_pref = cfg.v_max;
        s.goal = scenario->ego_reference.back();
        input.av_history.push_back(s);
      }
      const VehicleState& current = input.av_history.back();
      input.av_projection = project_av(current, {current.speed(), 0.0}, cfg.K, dt);

      PredictorOutput out = validate_prediction(input, model->predict(input));
      for (std::size_t i = 0; i < out.tracks.size(); ++i) {
        tracks.push_back(std::move(out.tracks[i]));
        truth.push_back(std::move(futures[i]));
      }
    }
  }
  if (tracks.empty()) {
    throw InvalidArgument("score_predictor: no pedestrian has " + std::to_string(cfg.H) +
                          " history and " + std::to_string(cfg.K) + " future samples");
  }
  return calibration_metrics(truth, tracks);
}

}  // namespace crowdnav
