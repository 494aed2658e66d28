#pragma once

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "skyrelay/error.hpp"
#include "skyrelay/mode_select.hpp"
#include "skyrelay/scenario.hpp"
#include "skyrelay/solver.hpp"

namespace skyrelay {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Scenario files
//
// Every key carries its unit. Missing keys keep the default deployment's
// value; unknown keys are rejected. The channel is given either as
// "link_budget" {bandwidth_hz, noise_density_dbm_per_hz, reference_snr_db}
// or as the pair "beta0_linear" + "noise_power_w".

namespace detail {

inline Vec2 vec2_from(const Json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("scenario: " + key + " must be [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline Json vec2_to(Vec2 v) { return Json::array({v.x, v.y}); }

inline void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError("scenario: " + where + " must be an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw ConfigError("scenario: unknown field '" + key + "' in " + where);
}

}  // namespace detail

inline Scenario scenario_from_json(const Json& j) {
  static const std::set<std::string> keys{
      "bs_position_m",        "uav_height_m",          "uav_start_m",
      "uav_end_m",            "uav_max_speed_m_per_s", "slot_duration_s",
      "slot_count",           "flight_box_m",          "vehicle_initial_m",
      "vehicle_velocity_m_per_s", "link_budget",       "beta0_linear",
      "noise_power_w",        "avg_bs_power_w",        "avg_relay_power_w",
      "rate_targets_bps_per_hz", "mode_threshold_bps_per_hz"};
  detail::check_keys(j, keys, "scenario");
  Scenario s = Scenario::default_deployment();
  try {
    if (j.contains("bs_position_m")) {
      const auto& b = j["bs_position_m"];
      if (!b.is_array() || b.size() != 3) throw ConfigError("scenario: bs_position_m must be [x, y, z]");
      s.bs_position = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>()};
    }
    if (j.contains("uav_height_m")) s.uav_height = j["uav_height_m"].get<double>();
    if (j.contains("uav_start_m")) s.uav_start = detail::vec2_from(j["uav_start_m"], "uav_start_m");
    if (j.contains("uav_end_m")) s.uav_end = detail::vec2_from(j["uav_end_m"], "uav_end_m");
    if (j.contains("uav_max_speed_m_per_s")) s.uav_max_speed = j["uav_max_speed_m_per_s"].get<double>();
    if (j.contains("slot_duration_s")) s.slot_duration = j["slot_duration_s"].get<double>();
    if (j.contains("slot_count")) s.slot_count = j["slot_count"].get<int>();
    if (j.contains("flight_box_m")) {
      const auto& b = j["flight_box_m"];
      detail::check_keys(b, {"x_min", "x_max", "y_min", "y_max"}, "flight_box_m");
      if (b.contains("x_min")) s.flight_box.x_min = b["x_min"].get<double>();
      if (b.contains("x_max")) s.flight_box.x_max = b["x_max"].get<double>();
      if (b.contains("y_min")) s.flight_box.y_min = b["y_min"].get<double>();
      if (b.contains("y_max")) s.flight_box.y_max = b["y_max"].get<double>();
    }
    for (const char* key : {"vehicle_initial_m", "vehicle_velocity_m_per_s"}) {
      if (!j.contains(key)) continue;
      const auto& v = j[key];
      if (!v.is_array() || v.size() != kVehicles) throw ConfigError(std::string("scenario: ") + key + " needs two entries");
      auto& dst = std::string(key) == "vehicle_initial_m" ? s.vehicle_initial : s.vehicle_velocity;
      for (std::size_t k = 0; k < kVehicles; ++k) dst[k] = detail::vec2_from(v[k], key);
    }
    const bool budget = j.contains("link_budget");
    const bool direct = j.contains("beta0_linear") || j.contains("noise_power_w");
    if (budget && direct) throw ConfigError("scenario: give either link_budget or beta0_linear/noise_power_w");
    if (budget) {
      const auto& b = j["link_budget"];
      detail::check_keys(b, {"bandwidth_hz", "noise_density_dbm_per_hz", "reference_snr_db"}, "link_budget");
      for (const char* key : {"bandwidth_hz", "noise_density_dbm_per_hz", "reference_snr_db"})
        if (!b.contains(key)) throw ConfigError(std::string("scenario: link_budget lacks ") + key);
      Scenario::set_channel_from_link_budget(s, b["bandwidth_hz"].get<double>(),
                                             b["noise_density_dbm_per_hz"].get<double>(),
                                             b["reference_snr_db"].get<double>());
    }
    if (direct) {
      if (!j.contains("beta0_linear") || !j.contains("noise_power_w"))
        throw ConfigError("scenario: beta0_linear and noise_power_w go together");
      s.beta0 = j["beta0_linear"].get<double>();
      s.noise_power = j["noise_power_w"].get<double>();
    }
    if (j.contains("avg_bs_power_w")) s.avg_bs_power = j["avg_bs_power_w"].get<double>();
    if (j.contains("avg_relay_power_w")) s.avg_relay_power = j["avg_relay_power_w"].get<double>();
    if (j.contains("rate_targets_bps_per_hz")) {
      const auto& r = j["rate_targets_bps_per_hz"];
      if (!r.is_array() || r.size() != kVehicles) throw ConfigError("scenario: rate_targets_bps_per_hz needs two entries");
      s.rate_targets = {r[0].get<double>(), r[1].get<double>()};
    }
    if (j.contains("mode_threshold_bps_per_hz")) s.mode_threshold = j["mode_threshold_bps_per_hz"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  s.validate();
  return s;
}

inline Json scenario_to_json(const Scenario& s) {
  Json j;
  j["bs_position_m"] = Json::array({s.bs_position.x, s.bs_position.y, s.bs_position.z});
  j["uav_height_m"] = s.uav_height;
  j["uav_start_m"] = detail::vec2_to(s.uav_start);
  j["uav_end_m"] = detail::vec2_to(s.uav_end);
  j["uav_max_speed_m_per_s"] = s.uav_max_speed;
  j["slot_duration_s"] = s.slot_duration;
  j["slot_count"] = s.slot_count;
  j["flight_box_m"] = {{"x_min", s.flight_box.x_min},
                       {"x_max", s.flight_box.x_max},
                       {"y_min", s.flight_box.y_min},
                       {"y_max", s.flight_box.y_max}};
  j["vehicle_initial_m"] = Json::array({detail::vec2_to(s.vehicle_initial[0]), detail::vec2_to(s.vehicle_initial[1])});
  j["vehicle_velocity_m_per_s"] =
      Json::array({detail::vec2_to(s.vehicle_velocity[0]), detail::vec2_to(s.vehicle_velocity[1])});
  j["beta0_linear"] = s.beta0;
  j["noise_power_w"] = s.noise_power;
  j["avg_bs_power_w"] = s.avg_bs_power;
  j["avg_relay_power_w"] = s.avg_relay_power;
  j["rate_targets_bps_per_hz"] = Json::array({s.rate_targets[0], s.rate_targets[1]});
  j["mode_threshold_bps_per_hz"] = s.mode_threshold;
  return j;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline Scenario load_scenario(const std::string& path) { return scenario_from_json(read_json_file(path)); }

// ---------------------------------------------------------------------------
// Per-slot CSV: n,x,y,p1,p2,pr,state,mode,R1,R2 with 12 significant digits.

inline constexpr const char* kSlotCsvHeader = "n,x,y,p1,p2,pr,state,mode,R1,R2";

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline void write_slot_csv(std::ostream& out, const Trajectory& t, const PowerAllocation& p, const ModeSchedule& m,
                           const std::vector<SlotRates>& rates) {
  if (t.size() != p.size() || t.size() != m.size() || t.size() != rates.size())
    throw ConfigError("write_slot_csv: slot counts differ");
  out << kSlotCsvHeader << '\n';
  for (std::size_t n = 0; n < t.size(); ++n) {
    const SlotPowers& q = p.slots[n];
    out << n + 1 << ',' << format_number(t.points[n].x) << ',' << format_number(t.points[n].y) << ','
        << format_number(q.p1) << ',' << format_number(q.p2) << ',' << format_number(q.pr) << ',' << m.state[n] << ','
        << to_int(m.mode[n]) << ',' << format_number(rates[n].rate[0]) << ',' << format_number(rates[n].rate[1])
        << '\n';
  }
}

inline void write_slot_csv(const std::string& path, const Trajectory& t, const PowerAllocation& p,
                           const ModeSchedule& m, const std::vector<SlotRates>& rates) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  write_slot_csv(out, t, p, m, rates);
}

/// Columns of a CSV file with a header row, by name.
inline std::map<std::string, std::vector<double>> read_csv_columns(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
  std::vector<std::string> names;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) names.push_back(cell);
  }
  std::map<std::string, std::vector<double>> cols;
  for (const auto& n : names) cols[n];
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t i = 0;
    for (; std::getline(ss, cell, ','); ++i) {
      if (i >= names.size()) throw ConfigError(path + ": too many cells on line " + std::to_string(row));
      try {
        std::size_t used = 0;
        cols[names[i]].push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::logic_error&) {
        throw ConfigError(path + ": bad number '" + cell + "' on line " + std::to_string(row));
      }
    }
    if (i != names.size()) throw ConfigError(path + ": too few cells on line " + std::to_string(row));
  }
  return cols;
}

namespace detail {
inline const std::vector<double>& column(const std::map<std::string, std::vector<double>>& c, const std::string& name,
                                         const std::string& path) {
  const auto it = c.find(name);
  if (it == c.end()) throw ConfigError(path + ": missing column " + name);
  return it->second;
}
}  // namespace detail

inline Trajectory read_trajectory_csv(const std::string& path) {
  const auto c = read_csv_columns(path);
  const auto& x = detail::column(c, "x", path);
  const auto& y = detail::column(c, "y", path);
  Trajectory t;
  for (std::size_t i = 0; i < x.size(); ++i) t.points.push_back({x[i], y[i]});
  return t;
}

inline PowerAllocation read_powers_csv(const std::string& path) {
  const auto c = read_csv_columns(path);
  const auto& p1 = detail::column(c, "p1", path);
  const auto& p2 = detail::column(c, "p2", path);
  const auto& pr = detail::column(c, "pr", path);
  PowerAllocation p;
  for (std::size_t i = 0; i < p1.size(); ++i) p.slots.push_back({p1[i], p2[i], pr[i]});
  return p;
}

// ---------------------------------------------------------------------------
// Summary JSON

inline Json energy_json(const Scenario& s, const PowerAllocation& p) {
  return {{"bs_used_w_slots", p.bs_energy()},
          {"bs_budget_w_slots", s.bs_energy()},
          {"relay_used_w_slots", p.relay_energy()},
          {"relay_budget_w_slots", s.relay_energy()}};
}

inline Json mode_json(const ModeSchedule& m) {
  const auto f = m.mode_fractions();
  Json states = Json::array();
  for (double x : m.state_fractions()) states.push_back(100.0 * x);
  return {{"sic_at_vehicle1_percent", 100.0 * f[0]},
          {"sic_at_vehicle2_percent", 100.0 * f[1]},
          {"oma_percent", 100.0 * f[2]},
          {"state_percent", states}};
}

inline Json summary_json(const Scenario& s, const SolverResult& r) {
  Json j;
  j["problem"] = to_string(r.problem);
  j["objective_bps_per_hz"] = r.objective;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["wall_time_s"] = r.wall_seconds;
  j["history"] = r.history;
  j["bound_history"] = r.bound_history;
  j["newton_steps"] = r.newton_steps;
  j["energy"] = energy_json(s, r.powers);
  j["modes"] = mode_json(r.schedule);
  j["events"] = r.events;
  return j;
}

inline void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace skyrelay
