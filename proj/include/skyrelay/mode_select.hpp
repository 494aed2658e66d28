#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "skyrelay/error.hpp"
#include "skyrelay/rates.hpp"
#include "skyrelay/scenario.hpp"

namespace skyrelay {

/// Number of channel-ordering states of the dynamic NOMA/OMA policy.
inline constexpr int kStates = 10;

struct ModeChoice {
  int state = 0;  // 1..10
  Mode mode = Mode::oma;
  friend bool operator==(const ModeChoice&, const ModeChoice&) = default;
};

/// Mode implied by a state: 1 and 3 use SIC at vehicle 1, 6 and 8 at vehicle 2.
inline Mode mode_of_state(int state) {
  if (state < 1 || state > kStates) throw DomainError("mode_of_state: state must lie in 1..10");
  if (state == 1 || state == 3) return Mode::sic_at_vehicle1;
  if (state == 6 || state == 8) return Mode::sic_at_vehicle2;
  return Mode::oma;
}

/// Picks the state and mode from the ordering of (h_r, h_1, h_2).
///
/// States 1..5 cover h_1 > h_2 and 6..10 the mirror. Within each half the
/// relay link is the strongest (1/2), in the middle (3/4) or the weakest (5).
/// NOMA is chosen only when the half-log ratio strictly exceeds `threshold`;
/// equal vehicle gains always give OMA.
inline ModeChoice select_mode(double h_r, double h_1, double h_2, double threshold) {
  if (!(h_r > 0.0) || !(h_1 > 0.0) || !(h_2 > 0.0)) throw DomainError("select_mode: gains must be positive");
  if (!(threshold >= 0.0)) throw DomainError("select_mode: threshold must be non-negative");

  const bool first_strong = h_1 >= h_2;
  const double strong = first_strong ? h_1 : h_2;
  const double weak = first_strong ? h_2 : h_1;
  const int base = first_strong ? 0 : 5;

  int offset;
  if (h_r >= strong) {
    offset = 0.5 * std::log2(strong / weak) > threshold ? 1 : 2;
  } else if (h_r > weak) {
    offset = 0.5 * std::log2(h_r / weak) > threshold ? 3 : 4;
  } else {
    offset = 5;
  }
  const int state = base + offset;
  return {state, mode_of_state(state)};
}

/// Per-slot states and modes; the dense form of the α/β/γ indicator matrices.
struct ModeSchedule {
  std::vector<int> state;
  std::vector<Mode> mode;

  std::size_t size() const { return mode.size(); }

  /// α: SIC at vehicle 1, β: SIC at vehicle 2, γ: OMA.
  bool alpha(std::size_t n) const { return mode.at(n) == Mode::sic_at_vehicle1; }
  bool beta(std::size_t n) const { return mode.at(n) == Mode::sic_at_vehicle2; }
  bool gamma(std::size_t n) const { return mode.at(n) == Mode::oma; }

  /// Fraction of slots in each mode, indexed by mode - 1.
  std::array<double, 3> mode_fractions() const {
    std::array<double, 3> f{};
    if (mode.empty()) return f;
    for (Mode m : mode) f[static_cast<std::size_t>(to_int(m) - 1)] += 1.0;
    for (double& x : f) x /= static_cast<double>(mode.size());
    return f;
  }

  /// Fraction of slots in each state, indexed by state - 1.
  std::array<double, kStates> state_fractions() const {
    std::array<double, kStates> f{};
    if (state.empty()) return f;
    for (int s : state) f[static_cast<std::size_t>(s - 1)] += 1.0;
    for (double& x : f) x /= static_cast<double>(state.size());
    return f;
  }
};

inline ModeSchedule mode_schedule(const ChannelState& channel, double threshold) {
  ModeSchedule m;
  const std::size_t n = channel.size();
  m.state.reserve(n);
  m.mode.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const ModeChoice c = select_mode(channel.relay[i], channel.vehicle[0][i], channel.vehicle[1][i], threshold);
    m.state.push_back(c.state);
    m.mode.push_back(c.mode);
  }
  return m;
}

inline ModeSchedule mode_schedule(const ChannelState& channel, const Scenario& s) {
  return mode_schedule(channel, s.mode_threshold);
}

/// Schedule with every slot in OMA (state reported as the OMA row of its ordering).
inline ModeSchedule all_oma_schedule(const ChannelState& channel) {
  ModeSchedule m = mode_schedule(channel, INFINITY);
  for (auto& x : m.mode) x = Mode::oma;
  return m;
}

}  // namespace skyrelay
