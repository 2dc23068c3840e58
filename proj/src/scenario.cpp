#include "crowdnav/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "crowdnav/error.hpp"

namespace crowdnav {

namespace {

constexpr double kFrameSnap = 1e-9;

const PedestrianState* find_in_frame(const std::vector<PedestrianState>& frame, AgentId id) {
  auto it = std::lower_bound(frame.begin(), frame.end(), id,
                             [](const PedestrianState& p, AgentId key) { return p.id < key; });
  return (it != frame.end() && it->id == id) ? &*it : nullptr;
}

}  // namespace

double Scenario::reference_duration() const {
  return ego_reference.empty() ? 0.0 : static_cast<double>(ego_reference.size() - 1) / fps;
}

std::vector<PedestrianState> Scenario::pedestrians_at(double time) const {
  if (ped_frames.empty()) return {};
  const double f = time * fps;
  const auto last = static_cast<double>(ped_frames.size() - 1);
  if (f < -kFrameSnap || f > last + kFrameSnap) return {};
  const double nearest = std::round(f);
  if (std::abs(f - nearest) <= kFrameSnap) return ped_frames[static_cast<std::size_t>(nearest)];

  const auto i0 = static_cast<std::size_t>(std::floor(f));
  const double alpha = f - static_cast<double>(i0);
  const auto& a = ped_frames[i0];
  const auto& b = ped_frames[i0 + 1];
  std::vector<PedestrianState> out;
  auto ib = b.begin();
  for (const auto& pa : a) {
    while (ib != b.end() && ib->id < pa.id) ++ib;
    if (ib == b.end()) break;
    if (ib->id != pa.id) continue;
    PedestrianState p = pa;
    p.position = (1.0 - alpha) * pa.position + alpha * ib->position;
    out.push_back(p);
  }
  return out;
}

std::optional<Vec2> Scenario::pedestrian_position(AgentId id, double time) const {
  if (ped_frames.empty()) return std::nullopt;
  const double f = time * fps;
  const auto last = static_cast<double>(ped_frames.size() - 1);
  if (f < -kFrameSnap || f > last + kFrameSnap) return std::nullopt;
  const double nearest = std::round(f);
  if (std::abs(f - nearest) <= kFrameSnap) {
    const auto* p = find_in_frame(ped_frames[static_cast<std::size_t>(nearest)], id);
    return p ? std::optional<Vec2>(p->position) : std::nullopt;
  }
  const auto i0 = static_cast<std::size_t>(std::floor(f));
  const double alpha = f - static_cast<double>(i0);
  const auto* pa = find_in_frame(ped_frames[i0], id);
  const auto* pb = find_in_frame(ped_frames[i0 + 1], id);
  if (!pa || !pb) return std::nullopt;
  return Vec2((1.0 - alpha) * pa->position + alpha * pb->position);
}

void Scenario::validate() const {
  auto fail = [this](const std::string& what) {
    throw InvalidArgument("scenario '" + id + "': " + what);
  };
  if (!(fps > 0.0)) fail("fps must be > 0");
  if (ego_reference.size() < 2) fail("needs at least 2 ego reference frames");
  if (ped_frames.size() != ego_reference.size()) {
    fail("pedestrian frame count " + std::to_string(ped_frames.size()) +
         " differs from ego reference length " + std::to_string(ego_reference.size()));
  }
  if (!(time_budget > 0.0)) fail("time_budget must be > 0");
  for (const auto& p : ego_reference) {
    if (!p.allFinite()) fail("non-finite ego reference position");
  }
  for (std::size_t f = 0; f < ped_frames.size(); ++f) {
    const auto& frame = ped_frames[f];
    for (std::size_t i = 0; i < frame.size(); ++i) {
      if (!frame[i].position.allFinite()) fail("non-finite pedestrian position");
      if (!(frame[i].radius > 0.0)) fail("pedestrian radius must be > 0");
      if (i > 0 && frame[i - 1].id >= frame[i].id) {
        fail("frame " + std::to_string(f) + " is not sorted by unique pedestrian id");
      }
    }
  }
}

}  // namespace crowdnav
