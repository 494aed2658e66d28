// skyrelay: command-line front end for the relay planner.
//
// Every subcommand writes PREFIX.csv and PREFIX.summary.json. Exit codes:
// 0 success, 2 infeasible, 3 parse or configuration error, 4 numerical failure.

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "skyrelay/io.hpp"
#include "skyrelay/oracle.hpp"
#include "skyrelay/solver.hpp"

using namespace skyrelay;

namespace {

enum Exit { ok = 0, infeasible = 2, parse_error = 3, numerical = 4 };

int report(const char* kind, const std::string& message, int code) {
  const Json j{{"error", kind}, {"message", message}, {"exit_code", code}};
  std::cerr << j.dump() << '\n';
  return code;
}

struct Common {
  std::string scenario;
  int slots = 0;
  std::string out;
};

Scenario load(const Common& c) {
  Scenario s = load_scenario(c.scenario);
  if (c.slots > 0) s = s.with_slots(c.slots);
  s.validate();
  return s;
}

void add_common(CLI::App* app, Common& c, const std::string& default_out) {
  c.out = default_out;
  app->add_option("scenario", c.scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  app->add_option("--slots", c.slots, "Override the number of slots")->check(CLI::PositiveNumber);
  app->add_option("--out", c.out, "Output prefix for PREFIX.csv and PREFIX.summary.json");
}

Vec2 parse_point(const std::string& text) {
  std::stringstream ss(text);
  Vec2 v;
  char comma = 0;
  if (!(ss >> v.x >> comma >> v.y) || comma != ',' || !ss.eof()) throw ConfigError("expected X,Y but got '" + text + "'");
  return v;
}

void write_outputs(const Common& c, const Scenario& s, const Trajectory& t, const PowerAllocation& p,
                   const ModeSchedule& m, const std::vector<SlotRates>& rates, const Json& summary) {
  write_slot_csv(c.out + ".csv", t, p, m, rates);
  Json j = summary;
  j["slot_count"] = s.slot_count;
  write_json_file(c.out + ".summary.json", j);
  std::cout << c.out << ".csv\n" << c.out << ".summary.json\n";
}

int run_solver(const Common& c, Problem problem, bool force_oma, const std::string& bound) {
  const Scenario s = load(c);
  SolverOptions opt;
  opt.force_oma = force_oma;
  opt.bound_form = bound == "convexified" ? BoundForm::convexified : BoundForm::tight;
  const SolverResult r = problem == Problem::sum_rate ? algorithm3_joint(s, opt) : solve_minrate(s, opt);
  Json j = summary_json(s, r);
  j["feasibility"] = check_feasibility(s, problem, r.trajectory, r.powers, r.schedule, r.rates).summary();
  write_outputs(c, s, r.trajectory, r.powers, r.schedule, r.rates, j);
  return ok;
}

int run_rates(const Common& c, const std::string& traj_file, const std::string& power_file,
              const std::string& objective) {
  const Scenario s = load(c);
  const Trajectory t = read_trajectory_csv(traj_file);
  const PowerAllocation p = read_powers_csv(power_file);
  if (t.size() != static_cast<std::size_t>(s.slot_count) || p.size() != t.size())
    throw ConfigError("rates: trajectory, powers and scenario disagree on the slot count");
  const ChannelState ch = channel_state(t, s);
  ModeSchedule m = mode_schedule(ch, s);
  // state and mode columns, when present, override the channel-based choice.
  const auto cols = read_csv_columns(power_file);
  if (const auto it = cols.find("mode"); it != cols.end()) {
    if (it->second.size() != t.size()) throw ConfigError("rates: mode column has the wrong length");
    for (std::size_t n = 0; n < t.size(); ++n) m.mode[n] = mode_from_int(static_cast<int>(it->second[n]));
  }
  if (const auto it = cols.find("state"); it != cols.end()) {
    if (it->second.size() != t.size()) throw ConfigError("rates: state column has the wrong length");
    for (std::size_t n = 0; n < t.size(); ++n) m.state[n] = static_cast<int>(it->second[n]);
  }
  const Problem problem = objective == "min" ? Problem::min_rate : Problem::sum_rate;
  const auto rates = exact_rates(s, t, p, m);
  Json j;
  j["problem"] = to_string(problem);
  j["objective_bps_per_hz"] = objective_of(problem, rates);
  j["energy"] = energy_json(s, p);
  j["modes"] = mode_json(m);
  j["feasibility"] = check_feasibility(s, problem, t, p, m, rates).summary();
  write_outputs(c, s, t, p, m, rates, j);
  return ok;
}

int run_oracle(const Common& c, const std::string& objective, double grid, double power_step,
               const std::string& power_grid, unsigned threads, bool no_targets) {
  const Scenario s = load(c);
  OracleOptions opt;
  opt.objective = objective == "min" ? Objective::min : Objective::sum;
  opt.xy_step = grid;
  opt.power_step = power_step;
  opt.power_grid = power_grid == "pairs" ? PowerGrid::pairs
                   : power_grid == "split" ? PowerGrid::budget_split
                                           : PowerGrid::automatic;
  opt.threads = threads;
  opt.rate_targets = !no_targets;
  const auto start = std::chrono::steady_clock::now();
  const OracleResult r = static_placement_oracle(s, opt);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  Trajectory t;
  t.points.assign(static_cast<std::size_t>(s.slot_count), r.position);
  PowerAllocation p{r.powers};
  ModeSchedule m;
  for (const ModeChoice& mc : r.modes) {
    m.state.push_back(mc.state);
    m.mode.push_back(mc.mode);
  }
  const auto rates = exact_rates(s, t, p, m);
  Json j;
  j["problem"] = objective == "min" ? "min-rate" : "sum-rate";
  j["objective_bps_per_hz"] = r.objective;
  j["position_m"] = Json::array({r.position.x, r.position.y});
  j["grid_m"] = grid;
  j["power_step_fraction"] = power_step;
  j["grid_points"] = r.evaluated;
  j["wall_time_s"] = wall;
  j["energy"] = energy_json(s, p);
  j["modes"] = mode_json(m);
  write_outputs(c, s, t, p, m, rates, j);
  return ok;
}

int run_highsnr(const Common& c, const std::vector<double>& sweep, const std::string& uav, const std::string& v1,
                const std::string& v2) {
  const Scenario s = load(c);
  Placement pl{{250.0, 250.0}, {s.vehicle_initial[0].x, 400.0}, {s.vehicle_initial[1].x, 500.0}};
  if (!uav.empty()) pl.uav = parse_point(uav);
  if (!v1.empty()) pl.vehicle1 = parse_point(v1);
  if (!v2.empty()) pl.vehicle2 = parse_point(v2);
  const HighSnrReport rep = highsnr_proposition_suite(s, {pl}, sweep);

  std::ofstream csv(c.out + ".csv");
  if (!csv) throw ConfigError("cannot write " + c.out + ".csv");
  csv << "dbm,case,noma_sum,noma_sum_hisnr,noma_min,noma_min_hisnr,oma_sum,oma_sum_hisnr,oma_min,oma_min_hisnr,"
         "fair_split,sum_flag,min_flag\n";
  double worst = 0.0;
  for (const HighSnrRow& row : rep.rows) {
    csv << format_number(row.dbm) << ',' << row.ordering_case;
    for (int sc = 0; sc < 2; ++sc)
      for (int ob = 0; ob < 2; ++ob) {
        csv << ',' << format_number(row.exact[sc][ob]) << ',' << format_number(row.approx[sc][ob]);
        worst = std::max(worst, row.gap(Scheme(sc), Objective(ob)));
      }
    csv << ',' << format_number(row.fair_split) << ',' << row.sum_order_violated << ',' << row.min_order_violated
        << '\n';
  }
  Json j;
  j["rows"] = rep.rows.size();
  j["largest_gap_bps_per_hz"] = worst;
  j["sum_order_flags"] = rep.sum_violations;
  j["min_order_flags"] = rep.min_violations;
  write_json_file(c.out + ".summary.json", j);
  std::cout << c.out << ".csv\n" << c.out << ".summary.json\n";
  return ok;
}

int run_validate(const Common& c) {
  const Scenario s = load(c);
  const Trajectory t = initial_trajectory(s);
  const PowerAllocation p = uniform_powers(s);
  const ModeSchedule m = mode_schedule(channel_state(t, s), s);
  const auto rates = exact_rates(s, t, p, m);
  const auto f = check_feasibility(s, Problem::sum_rate, t, p, m, rates);
  Json j;
  j["scenario"] = scenario_to_json(s);
  j["initial_point_feasible"] = f.feasible();
  j["feasibility"] = f.summary();
  j["sum_rate_bps_per_hz"] = objective_of(Problem::sum_rate, rates);
  j["min_rate_bps_per_hz"] = objective_of(Problem::min_rate, rates);
  j["energy"] = energy_json(s, p);
  j["modes"] = mode_json(m);
  write_outputs(c, s, t, p, m, rates, j);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trajectory, power and mode planner for a UAV relay serving two vehicles"};
  app.require_subcommand(1);

  Common sum_c, min_c, rates_c, oracle_c, hisnr_c, valid_c;
  bool force_oma = false;
  std::string bound = "tight";
  auto* sum = app.add_subcommand("solve-sumrate", "Maximize the average sum rate");
  add_common(sum, sum_c, "sumrate");
  sum->add_flag("--force-oma", force_oma, "Use OMA in every slot");
  sum->add_option("--bound", bound, "Lower-bound family")->check(CLI::IsMember({"tight", "convexified"}));

  auto* mn = app.add_subcommand("solve-minrate", "Maximize the minimum rate");
  add_common(mn, min_c, "minrate");
  mn->add_option("--bound", bound, "Lower-bound family")->check(CLI::IsMember({"tight", "convexified"}));

  std::string traj_file, power_file, rates_obj = "sum";
  auto* rt = app.add_subcommand("rates", "Exact rates for a given trajectory and power allocation");
  add_common(rt, rates_c, "rates");
  rt->add_option("--trajectory", traj_file, "CSV with x and y columns")->required()->check(CLI::ExistingFile);
  rt->add_option("--powers", power_file, "CSV with p1, p2, pr and optional mode columns")
      ->required()
      ->check(CLI::ExistingFile);
  rt->add_option("--objective", rates_obj, "Objective reported in the summary")->check(CLI::IsMember({"sum", "min"}));

  std::string oracle_obj = "sum", power_grid = "auto";
  double grid = 5.0, power_step = 0.01;
  unsigned threads = 0;
  bool no_targets = false;
  auto* orc = app.add_subcommand("oracle", "Exhaustive search over static UAV placements");
  add_common(orc, oracle_c, "oracle");
  orc->add_option("--objective", oracle_obj, "sum or min")->check(CLI::IsMember({"sum", "min"}));
  orc->add_option("--grid", grid, "Placement grid step in m")->check(CLI::PositiveNumber);
  orc->add_option("--power-step", power_step, "Power grid step as a fraction of the average BS power")
      ->check(CLI::Range(1e-6, 1.0));
  orc->add_option("--power-grid", power_grid, "auto, pairs or split")
      ->check(CLI::IsMember({"auto", "pairs", "split"}));
  orc->add_option("--threads", threads, "Worker threads, 0 for all cores");
  orc->add_flag("--no-targets", no_targets, "Ignore the per-slot rate targets");

  std::vector<double> sweep{23.0, 25.0, 28.0, 30.0};
  std::string uav, v1, v2;
  auto* hs = app.add_subcommand("highsnr", "Exact versus high-SNR rates over a power sweep");
  add_common(hs, hisnr_c, "highsnr");
  hs->add_option("--sweep", sweep, "Transmit powers in dBm")->delimiter(',');
  hs->add_option("--uav", uav, "UAV position X,Y in m");
  hs->add_option("--vehicle1", v1, "Vehicle 1 position X,Y in m");
  hs->add_option("--vehicle2", v2, "Vehicle 2 position X,Y in m");

  auto* val = app.add_subcommand("validate", "Check a scenario and its straight-line starting point");
  add_common(val, valid_c, "validate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("parse", e.what(), parse_error);
  }

  try {
    if (*sum) return run_solver(sum_c, Problem::sum_rate, force_oma, bound);
    if (*mn) return run_solver(min_c, Problem::min_rate, false, bound);
    if (*rt) return run_rates(rates_c, traj_file, power_file, rates_obj);
    if (*orc) return run_oracle(oracle_c, oracle_obj, grid, power_step, power_grid, threads, no_targets);
    if (*hs) return run_highsnr(hisnr_c, sweep, uav, v1, v2);
    if (*val) return run_validate(valid_c);
  } catch (const InfeasibleError& e) {
    return report("infeasible", e.what(), infeasible);
  } catch (const ConfigError& e) {
    return report("config", e.what(), parse_error);
  } catch (const DomainError& e) {
    return report("domain", e.what(), numerical);
  } catch (const NumericalError& e) {
    return report("numerical", e.what(), numerical);
  } catch (const std::exception& e) {
    return report("internal", e.what(), numerical);
  }
  return parse_error;
}
