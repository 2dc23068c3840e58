#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crowdnav/env.hpp"
#include "crowdnav/planner.hpp"
#include "crowdnav/predictor.hpp"

namespace crowdnav {

struct EpisodeMetrics {
  std::string scenario_id;
  TerminalKind terminal_kind = TerminalKind::running;
  double nav_time = 0.0;
  double path_length = 0.0;
  double intrusion_ratio = 0.0;                 // percent of steps
  std::optional<double> intrusion_distance;     // min d_min over intrusion steps
  std::optional<double> intrusion_speed;        // AV speed at that step
  std::size_t steps = 0;
  std::size_t infeasible_steps = 0;
  double compute_time_sum = 0.0;                // planner wall time only
  double compute_time_sq_sum = 0.0;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};

struct AggregateReport {
  double success = 0.0;
  double collision = 0.0;
  double timeout = 0.0;
  std::size_t episodes = 0;
  std::optional<MeanStd> nav_time;        // successful episodes only
  std::optional<MeanStd> path_length;     // successful episodes only
  std::optional<MeanStd> intrusion_ratio;
  std::optional<MeanStd> intrusion_distance;
  std::optional<MeanStd> intrusion_speed;
  std::optional<MeanStd> compute_time;    // per step, pooled
};

EpisodeMetrics episode_metrics(const EpisodeRecord& record, const Config& cfg);

/// Reduces rows in scenario-id order, so the result does not depend on the
/// order rows are passed in.
AggregateReport aggregate(std::span<const EpisodeMetrics> rows);

enum class ReportFormat { csv, markdown };

struct LabeledReport {
  std::string label;
  AggregateReport report;
};

/// Table with one row per report, two decimals, "-" for empty cells.
std::string emit_report(std::span<const LabeledReport> reports, ReportFormat format);
std::string emit_report(const AggregateReport& report, ReportFormat format,
                        const std::string& label = "");

/// Parses the CSV form produced by emit_report.
std::vector<LabeledReport> parse_report_csv(const std::string& text);

struct EpisodeResult {
  EpisodeRecord record;
  std::vector<JointObservation> observations;  // observation at each step, incl. reset
};

/// Runs one episode to termination.
EpisodeResult run_episode(std::shared_ptr<const Scenario> scenario, Planner& planner,
                          std::unique_ptr<Predictor> predictor, const Config& cfg,
                          bool keep_observations = false);

struct Evaluation {
  std::vector<EpisodeResult> episodes;  // same order as the input scenarios
  std::vector<EpisodeMetrics> rows;     // completed episodes only
  AggregateReport report;
  std::size_t errors = 0;
};

/// Evaluates a planner on every scenario, `threads` episodes at a time.
/// Planner and predictor failures end the episode with `record.error` set.
Evaluation evaluate(std::span<const std::shared_ptr<const Scenario>> scenarios,
                    const PlannerFactory& planner, const PredictorFactory& predictor,
                    const Config& cfg, int threads = 1, bool keep_observations = false);

/// Re-runs the evaluation once per value of a configuration field (dotted
/// name, e.g. "r_g" or "mpc.q_p"), all other settings unchanged.
std::vector<AggregateReport> sensitivity_sweep(
    const std::string& param_name, std::span<const double> values, const std::string& planner,
    const std::string& predictor, std::span<const std::shared_ptr<const Scenario>> scenarios,
    const Config& cfg, int threads = 1);

/// Slides over every time on the dt grid where a pedestrian has H observed
/// history samples and K recorded future positions, queries the predictor once
/// per (scenario, time) and scores all such windows against the replay.
/// Throws InvalidArgument when no window qualifies.
CalibrationReport score_predictor(std::span<const std::shared_ptr<const Scenario>> scenarios,
                                  const PredictorFactory& predictor, const Config& cfg);

/// Returns a copy of cfg with the named field set. Throws on unknown names.
Config with_parameter(const Config& cfg, const std::string& param_name, double value);

}  // namespace crowdnav
