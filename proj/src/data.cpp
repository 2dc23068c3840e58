#include "crowdnav/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "crowdnav/error.hpp"

namespace crowdnav {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& field, const char* column, std::size_t line_no) {
  T value{};
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc() || ptr != last) {
    throw ParseError("line " + std::to_string(line_no) + ": column '" + column +
                     "' is not a valid number: '" + field + "'");
  }
  return value;
}

}  // namespace

RawTrajectoryTable parse_table(const std::filesystem::path& path, double fps) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trajectory table '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_table_text(buffer.str(), fps);
}

RawTrajectoryTable parse_table_text(const std::string& text, double fps) {
  if (!(fps > 0.0)) throw InvalidArgument("fps must be > 0");
  RawTrajectoryTable table;
  table.fps = fps;

  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) header = split_fields(line);
  }
  if (header.empty()) throw ParseError("trajectory table is empty");

  const char* required[] = {"frame", "agent_id", "agent_type", "x", "y"};
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[header[i]] = i;
  std::array<std::size_t, 5> idx{};
  for (std::size_t r = 0; r < 5; ++r) {
    auto it = column.find(required[r]);
    if (it == column.end()) {
      throw ParseError(std::string("trajectory table header lacks column '") + required[r] + "'");
    }
    idx[r] = it->second;
  }

  std::map<std::pair<std::int64_t, AgentId>, std::size_t> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, found " +
                       std::to_string(fields.size()));
    }
    TrajectoryRow row;
    row.frame = parse_number<std::int64_t>(fields[idx[0]], "frame", line_no);
    row.agent_id = parse_number<AgentId>(fields[idx[1]], "agent_id", line_no);
    const std::string& type = fields[idx[2]];
    if (type == "pedestrian") {
      row.agent_type = AgentType::pedestrian;
    } else if (type == "vehicle") {
      row.agent_type = AgentType::vehicle;
    } else {
      throw ParseError("line " + std::to_string(line_no) + ": unknown agent_type '" + type +
                       "' (expected pedestrian or vehicle)");
    }
    row.x = parse_number<double>(fields[idx[3]], "x", line_no);
    row.y = parse_number<double>(fields[idx[4]], "y", line_no);
    if (row.frame < 0) {
      throw ParseError("line " + std::to_string(line_no) + ": negative frame index");
    }
    if (!std::isfinite(row.x) || !std::isfinite(row.y)) {
      throw ParseError("line " + std::to_string(line_no) + ": non-finite position");
    }
    const auto [it, inserted] = seen.emplace(std::make_pair(row.frame, row.agent_id), line_no);
    if (!inserted) {
      throw ParseError("line " + std::to_string(line_no) + ": duplicate (frame " +
                       std::to_string(row.frame) + ", agent " + std::to_string(row.agent_id) +
                       "), first seen on line " + std::to_string(it->second));
    }
    table.rows.push_back(row);
  }
  return table;
}

ExtractionResult extract_scenarios(const RawTrajectoryTable& table, const Config& cfg) {
  std::map<AgentId, std::map<std::int64_t, Vec2>> vehicles;
  std::map<std::int64_t, std::vector<PedestrianState>> ped_by_frame;
  for (const auto& row : table.rows) {
    if (row.agent_type == AgentType::vehicle) {
      vehicles[row.agent_id][row.frame] = Vec2(row.x, row.y);
    } else {
      ped_by_frame[row.frame].push_back({row.agent_id, Vec2(row.x, row.y), cfg.ped_radius});
    }
  }
  if (vehicles.empty()) throw InvalidArgument("trajectory table contains no vehicles");
  for (auto& [frame, peds] : ped_by_frame) {
    std::sort(peds.begin(), peds.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  }

  ExtractionResult result;
  for (const auto& [vid, track] : vehicles) {
    if (static_cast<int>(track.size()) < cfg.min_frames) {
      result.dropped.push_back({vid, "only " + std::to_string(track.size()) + " frames (< " +
                                         std::to_string(cfg.min_frames) + ")"});
      continue;
    }
    const std::int64_t f0 = track.begin()->first;
    const std::int64_t f1 = track.rbegin()->first;
    Scenario s;
    s.id = "veh_" + std::to_string(vid);
    s.fps = table.fps;
    // Gaps in the vehicle track are filled by linear interpolation.
    for (auto it = track.begin(); it != track.end(); ++it) {
      auto next = std::next(it);
      s.ego_reference.push_back(it->second);
      if (next == track.end()) break;
      const auto gap = next->first - it->first;
      for (std::int64_t g = 1; g < gap; ++g) {
        const double a = static_cast<double>(g) / static_cast<double>(gap);
        s.ego_reference.push_back((1.0 - a) * it->second + a * next->second);
      }
    }
    for (std::int64_t f = f0; f <= f1; ++f) {
      auto it = ped_by_frame.find(f);
      s.ped_frames.push_back(it == ped_by_frame.end() ? std::vector<PedestrianState>{} : it->second);
    }
    s.time_budget = static_cast<double>(f1 - f0) / table.fps + cfg.timeout_margin;
    result.scenarios.push_back(std::move(s));
  }
  return result;
}

void SplitSpec::validate() const {
  if (train < 0.0 || test < 0.0 || val < 0.0) {
    throw InvalidArgument("split fractions must be >= 0");
  }
  if (std::abs(train + test + val - 1.0) > 1e-9) {
    throw InvalidArgument("split fractions must sum to 1");
  }
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  const std::array<double, 3> fractions = {spec.train, spec.test, spec.val};
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double raw = static_cast<double>(n) * fractions[i];
    sizes[i] = static_cast<std::size_t>(std::floor(raw + 1e-9));
    remainder[i] = raw - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  std::array<std::size_t, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++sizes[order[i % 3]];
  return sizes;
}

ScenarioSplit split_scenarios(std::vector<Scenario> scenarios, const SplitSpec& spec,
                              std::uint64_t seed) {
  const auto sizes = split_sizes(scenarios.size(), spec);
  std::sort(scenarios.begin(), scenarios.end(),
            [](const Scenario& a, const Scenario& b) { return a.id < b.id; });
  std::mt19937_64 rng(seed);
  std::shuffle(scenarios.begin(), scenarios.end(), rng);

  ScenarioSplit out;
  auto it = std::make_move_iterator(scenarios.begin());
  out.train.assign(it, it + static_cast<std::ptrdiff_t>(sizes[0]));
  it += static_cast<std::ptrdiff_t>(sizes[0]);
  out.test.assign(it, it + static_cast<std::ptrdiff_t>(sizes[1]));
  it += static_cast<std::ptrdiff_t>(sizes[1]);
  out.val.assign(it, std::make_move_iterator(scenarios.end()));
  return out;
}

SynthTemplate synth_template_from_string(const std::string& name) {
  if (name == "crossing") return SynthTemplate::crossing;
  if (name == "head_on") return SynthTemplate::head_on;
  if (name == "static_crowd") return SynthTemplate::static_crowd;
  if (name == "dense_ring") return SynthTemplate::dense_ring;
  throw InvalidArgument("unknown synthetic template '" + name +
                        "' (expected crossing, head_on, static_crowd or dense_ring)");
}

const char* to_string(SynthTemplate t) {
  switch (t) {
    case SynthTemplate::crossing: return "crossing";
    case SynthTemplate::head_on: return "head_on";
    case SynthTemplate::static_crowd: return "static_crowd";
    case SynthTemplate::dense_ring: return "dense_ring";
  }
  return "crossing";
}

namespace {

// Constant-speed walker on a circular arc (straight when turn_rate is 0)
// passing through `anchor` at time `t_anchor` with heading `heading`.
struct Walker {
  Vec2 anchor;
  double t_anchor = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  double turn_rate = 0.0;

  Vec2 at(double t) const {
    const double dt = t - t_anchor;
    if (std::abs(turn_rate) < 1e-12) {
      return anchor + speed * dt * Vec2(std::cos(heading), std::sin(heading));
    }
    const double phi = heading + turn_rate * dt;
    const double r = speed / turn_rate;
    return anchor + r * Vec2(std::sin(phi) - std::sin(heading), std::cos(heading) - std::cos(phi));
  }
};

}  // namespace

Scenario synth_scenario(SynthTemplate kind, int n_peds, std::uint64_t seed, const Config& cfg,
                        const SynthOptions& options) {
  if (n_peds < 0) throw InvalidArgument("synth_scenario: n_peds must be >= 0");
  if (!(options.length > 0.0 && options.reference_speed > 0.0 && options.fps > 0.0)) {
    throw InvalidArgument("synth_scenario: length, reference_speed and fps must be > 0");
  }
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };

  const double L = options.length;
  const double duration = L / options.reference_speed;
  const auto n_frames = static_cast<std::size_t>(std::ceil(duration * options.fps - 1e-9)) + 1;

  Scenario s;
  s.id = std::string(to_string(kind)) + "_n" + std::to_string(n_peds) + "_s" + std::to_string(seed);
  s.fps = options.fps;
  for (std::size_t j = 0; j < n_frames; ++j) {
    const double x = std::min(L, options.reference_speed * static_cast<double>(j) / options.fps);
    s.ego_reference.emplace_back(x, 0.0);
  }
  s.time_budget = static_cast<double>(n_frames - 1) / options.fps + cfg.timeout_margin;

  std::vector<Walker> walkers;
  switch (kind) {
    case SynthTemplate::crossing: {
      for (int i = 0; i < n_peds; ++i) {
        Walker w;
        const double x_cross = L / 2.0 + (i == 0 ? 0.0 : uniform(-4.0, 4.0));
        w.anchor = Vec2(x_cross, 0.0);
        // Reaches the ego line when a full-speed vehicle would.
        w.t_anchor = x_cross / cfg.v_max + (i == 0 ? 0.0 : uniform(-1.0, 1.0));
        w.heading = (i % 2 == 0) ? kPi / 2.0 : -kPi / 2.0;
        w.speed = uniform(1.0, 1.5);
        const double rate = uniform(0.03, 0.08);
        w.turn_rate = uniform(0.0, 1.0) < 0.5 ? -rate : rate;
        walkers.push_back(w);
      }
      break;
    }
    case SynthTemplate::head_on: {
      for (int i = 0; i < n_peds; ++i) {
        Walker w;
        w.anchor = Vec2(uniform(0.5 * L, L + 5.0), uniform(-3.0, 3.0));
        w.heading = kPi;
        w.speed = uniform(1.0, 1.5);
        walkers.push_back(w);
      }
      break;
    }
    case SynthTemplate::static_crowd: {
      const double x_lo = std::min(5.0, 0.25 * L);
      const double x_hi = std::max(x_lo + 1.0, L - 5.0);
      const double width = std::max(12.0, n_peds / (0.05 * (x_hi - x_lo)));
      for (int i = 0; i < n_peds; ++i) {
        Vec2 p;
        for (int attempt = 0; attempt < 100; ++attempt) {
          p = Vec2(uniform(x_lo, x_hi), uniform(-width / 2.0, width / 2.0));
          const bool spaced = std::all_of(walkers.begin(), walkers.end(), [&](const Walker& o) {
            return (o.anchor - p).norm() >= 2.0 * cfg.ped_radius + 0.2;
          });
          if (spaced) break;
        }
        Walker w;
        w.anchor = p;
        walkers.push_back(w);
      }
      break;
    }
    case SynthTemplate::dense_ring: {
      for (int i = 0; i < n_peds; ++i) {
        const double a = 2.0 * kPi * i / std::max(n_peds, 1);
        Walker w;
        w.anchor = options.ring_radius * Vec2(std::cos(a), std::sin(a));
        walkers.push_back(w);
      }
      break;
    }
  }

  s.ped_frames.resize(n_frames);
  for (std::size_t j = 0; j < n_frames; ++j) {
    const double t = static_cast<double>(j) / options.fps;
    for (std::size_t i = 0; i < walkers.size(); ++i) {
      s.ped_frames[j].push_back({static_cast<AgentId>(i + 1), walkers[i].at(t), cfg.ped_radius});
    }
  }
  return s;
}

}  // namespace crowdnav
