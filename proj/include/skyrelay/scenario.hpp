#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "skyrelay/error.hpp"

namespace skyrelay {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) = default;

  double squared_norm() const { return x * x + y * y; }
  double norm() const { return std::sqrt(squared_norm()); }
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

struct FlightBox {
  double x_min = 0.0;
  double x_max = 1000.0;
  double y_min = 0.0;
  double y_max = 1000.0;

  bool contains(Vec2 p, double tol = 0.0) const {
    return p.x >= x_min - tol && p.x <= x_max + tol && p.y >= y_min - tol && p.y <= y_max + tol;
  }
};

/// Number of ground vehicles served by the relay.
inline constexpr std::size_t kVehicles = 2;

/// Converts a power level in dBm to watts.
inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

/// Physical constants, kinematics and budgets of one relay deployment.
///
/// Vehicle indices are zero-based throughout the library: index 0 is
/// vehicle 1 and index 1 is vehicle 2.
struct Scenario {
  Vec3 bs_position{0.0, 0.0, 0.0};
  double uav_height = 100.0;  // m
  Vec2 uav_start{200.0, 300.0};
  Vec2 uav_end{200.0, 300.0};
  double uav_max_speed = 30.0;  // m/s
  double slot_duration = 0.1;   // s
  int slot_count = 600;
  FlightBox flight_box{};
  std::array<Vec2, kVehicles> vehicle_initial{Vec2{700.0, 100.0}, Vec2{702.0, 0.0}};
  std::array<Vec2, kVehicles> vehicle_velocity{Vec2{0.0, 15.0}, Vec2{0.0, 15.0}};
  double beta0 = 0.0;        // linear channel power at 1 m
  double noise_power = 0.0;  // W
  double avg_bs_power = 0.5;     // W
  double avg_relay_power = 0.5;  // W
  std::array<double, kVehicles> rate_targets{1.0, 1.0};  // bps/Hz
  double mode_threshold = 0.1;                           // bps/Hz

  /// Noise power of one half-band in the orthogonal mode.
  double oma_noise_power() const { return noise_power / 2.0; }
  double bs_energy() const { return slot_count * avg_bs_power; }
  double relay_energy() const { return slot_count * avg_relay_power; }
  /// Largest displacement allowed within one slot.
  double step_limit() const { return uav_max_speed * slot_duration; }
  /// σ²/β₀, the factor mapping squared distance to the inverse gain ψ.
  double psi_per_squared_meter() const { return noise_power / beta0; }

  /// Throws ConfigError when an invariant does not hold.
  void validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("scenario: " + msg); };
    if (!(uav_max_speed >= 0.0)) fail("uav_max_speed must be non-negative");
    if (!(slot_duration > 0.0)) fail("slot_duration must be positive");
    if (slot_count < 1) fail("slot_count must be at least 1");
    if (!(uav_height > 0.0)) fail("uav_height must be positive");
    if (!(beta0 > 0.0)) fail("beta0 must be positive");
    if (!(noise_power > 0.0)) fail("noise_power must be positive");
    if (!(avg_bs_power >= 0.0) || !(avg_relay_power >= 0.0)) fail("average powers must be non-negative");
    if (!(flight_box.x_min <= flight_box.x_max) || !(flight_box.y_min <= flight_box.y_max))
      fail("flight_box bounds are inverted");
    if (!flight_box.contains(uav_start)) fail("uav_start lies outside flight_box");
    if (!flight_box.contains(uav_end)) fail("uav_end lies outside flight_box");
    for (double r : rate_targets)
      if (!(r >= 0.0)) fail("rate targets must be non-negative");
    if (!(mode_threshold >= 0.0)) fail("mode_threshold must be non-negative");
    if (!(uav_height - bs_position.z > 0.0)) fail("uav_height must exceed the BS height");
  }

  /// Default deployment: 10 MHz, -174 dBm/Hz, 70 dB reference SNR.
  static Scenario default_deployment() {
    Scenario s;
    set_channel_from_link_budget(s, 10e6, -174.0, 70.0);
    return s;
  }

  /// Derives σ² = N₀·B and β₀ from the reference SNR β₀/σ².
  static void set_channel_from_link_budget(Scenario& s, double bandwidth_hz, double noise_density_dbm_per_hz,
                                           double reference_snr_db) {
    if (!(bandwidth_hz > 0.0)) throw ConfigError("scenario: bandwidth must be positive");
    s.noise_power = dbm_to_watts(noise_density_dbm_per_hz) * bandwidth_hz;
    s.beta0 = s.noise_power * std::pow(10.0, reference_snr_db / 10.0);
  }

  /// Same deployment with a different horizon; budgets follow E = N·P̄.
  Scenario with_slots(int n) const {
    Scenario s = *this;
    s.slot_count = n;
    return s;
  }
};

/// Horizontal UAV positions for slots 1..N (stored at indices 0..N-1).
struct Trajectory {
  std::vector<Vec2> points;

  std::size_t size() const { return points.size(); }
  const Vec2& at_slot(int n) const { return points.at(static_cast<std::size_t>(n - 1)); }
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Free-space channel power gain β₀/d² between the UAV and a node.
inline double channel_gain(Vec2 uav_xy, Vec2 node_xy, double height, double beta0) {
  if (!(height > 0.0)) throw ConfigError("channel_gain: height must be positive");
  if (!(beta0 > 0.0)) throw ConfigError("channel_gain: beta0 must be positive");
  const Vec2 d = uav_xy - node_xy;
  return beta0 / (d.squared_norm() + height * height);
}

/// Position of vehicle `k` (0-based) at slot `n`, with n = 0 the initial position.
inline Vec2 vehicle_position(const Scenario& s, std::size_t k, int n) {
  if (k >= kVehicles) throw ConfigError("vehicle_position: vehicle index out of range");
  if (n < 0 || n > s.slot_count) {
    std::ostringstream os;
    os << "vehicle_position: slot " << n << " outside [0, " << s.slot_count << "]";
    throw ConfigError(os.str());
  }
  const double t = n * s.slot_duration;
  return s.vehicle_initial[k] + t * s.vehicle_velocity[k];
}

/// Straight line from start to end with N equally spaced points, the last at the end point.
inline Trajectory initial_trajectory(const Scenario& s) {
  const Vec2 delta = s.uav_end - s.uav_start;
  const double length = delta.norm();
  const double reach = s.slot_count * s.step_limit();
  if (length > reach * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "initial_trajectory: straight path of " << length << " m exceeds N*V*tau = " << reach
       << " m; needs N >= " << static_cast<long>(std::ceil(length / s.step_limit() - 1e-12))
       << " or V >= " << length / (s.slot_count * s.slot_duration) << " m/s";
    throw InfeasibleError(os.str());
  }
  Trajectory t;
  t.points.reserve(static_cast<std::size_t>(s.slot_count));
  for (int n = 1; n <= s.slot_count; ++n)
    t.points.push_back(s.uav_start + (static_cast<double>(n) / s.slot_count) * delta);
  return t;
}

enum class ViolationKind { velocity, start, end, box, length };

struct TrajectoryViolation {
  ViolationKind kind;
  int slot;          // 1-based
  double magnitude;  // metres beyond the limit
};

struct TrajectoryReport {
  std::vector<TrajectoryViolation> violations;
  bool feasible() const { return violations.empty(); }
  std::size_t count(ViolationKind k) const {
    std::size_t c = 0;
    for (const auto& v : violations) c += v.kind == k ? 1 : 0;
    return c;
  }
};

inline const char* to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::velocity: return "velocity";
    case ViolationKind::start: return "start";
    case ViolationKind::end: return "end";
    case ViolationKind::box: return "box";
    case ViolationKind::length: return "length";
  }
  return "unknown";
}

/// Lists every violated motion constraint; never throws.
inline TrajectoryReport validate_trajectory(const Trajectory& traj, const Scenario& s, double tol = 1e-6) {
  TrajectoryReport report;
  const auto n_points = static_cast<int>(traj.size());
  if (n_points != s.slot_count) {
    report.violations.push_back({ViolationKind::length, 0, static_cast<double>(n_points - s.slot_count)});
    if (n_points == 0) return report;
  }
  const double limit = s.step_limit();
  auto check_step = [&](ViolationKind kind, int slot, Vec2 a, Vec2 b) {
    const double excess = (b - a).norm() - limit;
    if (excess > tol) report.violations.push_back({kind, slot, excess});
  };
  check_step(ViolationKind::start, 1, s.uav_start, traj.points.front());
  for (int n = 2; n <= n_points; ++n)
    check_step(ViolationKind::velocity, n, traj.points[n - 2], traj.points[n - 1]);
  check_step(ViolationKind::end, n_points, traj.points.back(), s.uav_end);
  const FlightBox& b = s.flight_box;
  for (int n = 1; n <= n_points; ++n) {
    const Vec2 p = traj.points[n - 1];
    const double excess = std::max({b.x_min - p.x, p.x - b.x_max, b.y_min - p.y, p.y - b.y_max});
    if (excess > tol) report.violations.push_back({ViolationKind::box, n, excess});
  }
  return report;
}

/// Per-slot gains BS→relay and relay→vehicle, with ψ = σ²/h.
struct ChannelState {
  std::vector<double> relay;                             // h_r[n]
  std::array<std::vector<double>, kVehicles> vehicle;    // h_k[n]
  std::vector<double> psi_relay;                         // σ²/h_r[n]
  std::array<std::vector<double>, kVehicles> psi_vehicle;

  std::size_t size() const { return relay.size(); }
};

/// Gain of the BS→relay link for a UAV at `uav_xy`.
inline double relay_gain(const Scenario& s, Vec2 uav_xy) {
  return channel_gain(uav_xy, Vec2{s.bs_position.x, s.bs_position.y}, s.uav_height - s.bs_position.z, s.beta0);
}

inline ChannelState channel_state(const Trajectory& traj, const Scenario& s) {
  ChannelState c;
  const std::size_t n = traj.size();
  c.relay.resize(n);
  c.psi_relay.resize(n);
  for (std::size_t k = 0; k < kVehicles; ++k) {
    c.vehicle[k].resize(n);
    c.psi_vehicle[k].resize(n);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 uav = traj.points[i];
    c.relay[i] = relay_gain(s, uav);
    c.psi_relay[i] = s.noise_power / c.relay[i];
    for (std::size_t k = 0; k < kVehicles; ++k) {
      const Vec2 v = vehicle_position(s, k, static_cast<int>(i) + 1);
      c.vehicle[k][i] = channel_gain(uav, v, s.uav_height, s.beta0);
      c.psi_vehicle[k][i] = s.noise_power / c.vehicle[k][i];
    }
  }
  return c;
}

}  // namespace skyrelay
