#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "skyrelay/barrier.hpp"
#include "skyrelay/error.hpp"
#include "skyrelay/mode_select.hpp"
#include "skyrelay/rates.hpp"
#include "skyrelay/sca.hpp"
#include "skyrelay/scenario.hpp"

namespace skyrelay {

enum class Problem { sum_rate, min_rate };

inline const char* to_string(Problem p) { return p == Problem::sum_rate ? "sum-rate" : "min-rate"; }

struct PowerAllocation {
  std::vector<SlotPowers> slots;

  std::size_t size() const { return slots.size(); }
  double bs_energy() const {
    double e = 0.0;
    for (const auto& p : slots) e += p.bs_total();
    return e;
  }
  double relay_energy() const {
    double e = 0.0;
    for (const auto& p : slots) e += p.pr;
    return e;
  }
  friend bool operator==(const PowerAllocation&, const PowerAllocation&) = default;
};

/// Equal split of the average BS power and the average relay power in every slot.
inline PowerAllocation uniform_powers(const Scenario& s) {
  return {std::vector<SlotPowers>(static_cast<std::size_t>(s.slot_count),
                                  SlotPowers{0.5 * s.avg_bs_power, 0.5 * s.avg_bs_power, s.avg_relay_power})};
}

struct SolverOptions {
  int max_outer = 30;
  double rel_tol = 1e-4;           // stop once the relative improvement falls below this
  double freeze_modes_below = 1e-3;  // keep modes fixed once improvement falls below this
  BoundForm bound_form = BoundForm::tight;
  bool force_oma = false;          // sum-rate with every slot in OMA
  BarrierOptions barrier{};
};

struct SolverResult {
  Problem problem = Problem::sum_rate;
  Trajectory trajectory;
  PowerAllocation powers;
  ModeSchedule schedule;
  std::vector<SlotRates> rates;
  double objective = 0.0;             // mean per-slot sum rate, or min over slots and vehicles
  std::vector<double> history;        // exact objective of each accepted iterate, starting point first
  std::vector<double> bound_history;  // lower-bound objective of each accepted iterate
  std::vector<int> newton_steps;      // per outer iteration
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> events;    // mode-switch rejections, fallbacks
  double wall_seconds = 0.0;
};

// ---------------------------------------------------------------------------
// Evaluation and feasibility

inline SlotGains slot_gains(const ChannelState& c, std::size_t n) {
  return {c.relay[n], {c.vehicle[0][n], c.vehicle[1][n]}};
}

inline std::vector<SlotRates> exact_rates(const Scenario& s, const Trajectory& t, const PowerAllocation& p,
                                          const ModeSchedule& m) {
  if (t.size() != p.size() || t.size() != m.size()) throw ConfigError("exact_rates: slot counts differ");
  const ChannelState c = channel_state(t, s);
  std::vector<SlotRates> out(t.size());
  for (std::size_t n = 0; n < t.size(); ++n) out[n] = slot_rates(m.mode[n], slot_gains(c, n), p.slots[n], s.noise_power);
  return out;
}

inline double objective_of(Problem problem, const std::vector<SlotRates>& rates) {
  if (rates.empty()) return 0.0;
  if (problem == Problem::min_rate) {
    double v = std::numeric_limits<double>::infinity();
    for (const auto& r : rates) v = std::min(v, r.min());
    return v;
  }
  double total = 0.0;
  for (const auto& r : rates) total += r.sum();
  return total / static_cast<double>(rates.size());
}

struct FeasibilityReport {
  TrajectoryReport trajectory;
  double bs_energy_excess = 0.0;     // J above the budget, 0 when within
  double relay_energy_excess = 0.0;
  std::vector<int> negative_power_slots;
  std::vector<int> sic_violation_slots;
  std::vector<int> target_violation_slots;

  bool feasible() const {
    return trajectory.feasible() && bs_energy_excess == 0.0 && relay_energy_excess == 0.0 &&
           negative_power_slots.empty() && sic_violation_slots.empty() && target_violation_slots.empty();
  }
  std::string summary() const {
    std::ostringstream os;
    if (!trajectory.feasible()) os << trajectory.violations.size() << " trajectory violation(s); ";
    if (bs_energy_excess > 0.0) os << "BS energy over budget by " << bs_energy_excess << "; ";
    if (relay_energy_excess > 0.0) os << "relay energy over budget by " << relay_energy_excess << "; ";
    auto list = [&os](const char* what, const std::vector<int>& v) {
      if (v.empty()) return;
      os << what << " at slots";
      for (std::size_t i = 0; i < std::min<std::size_t>(v.size(), 10); ++i) os << ' ' << v[i];
      if (v.size() > 10) os << " ...";
      os << "; ";
    };
    list("negative power", negative_power_slots);
    list("SIC ordering", sic_violation_slots);
    list("rate target", target_violation_slots);
    std::string r = os.str();
    return r.empty() ? "feasible" : r.substr(0, r.size() - 2);
  }
};

/// Checks every constraint of the chosen problem. Rate targets and SIC ordering
/// apply to the sum-rate problem only.
inline FeasibilityReport check_feasibility(const Scenario& s, Problem problem, const Trajectory& t,
                                           const PowerAllocation& p, const ModeSchedule& m,
                                           const std::vector<SlotRates>& rates, double tol = 1e-6) {
  FeasibilityReport r;
  r.trajectory = validate_trajectory(t, s, tol);
  r.bs_energy_excess = std::max(0.0, p.bs_energy() - s.bs_energy() * (1.0 + tol));
  r.relay_energy_excess = std::max(0.0, p.relay_energy() - s.relay_energy() * (1.0 + tol));
  for (std::size_t n = 0; n < p.size(); ++n) {
    const int slot = static_cast<int>(n) + 1;
    const SlotPowers& q = p.slots[n];
    if (q.p1 < 0.0 || q.p2 < 0.0 || q.pr < 0.0) r.negative_power_slots.push_back(slot);
    if (problem != Problem::sum_rate) continue;
    const double slack = tol * s.avg_bs_power;
    if ((m.mode[n] == Mode::sic_at_vehicle1 && q.p2 < q.p1 - slack) ||
        (m.mode[n] == Mode::sic_at_vehicle2 && q.p1 < q.p2 - slack))
      r.sic_violation_slots.push_back(slot);
    for (std::size_t k = 0; k < kVehicles; ++k)
      if (rates[n].rate[k] < s.rate_targets[k] - tol) {
        r.target_violation_slots.push_back(slot);
        break;
      }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Subproblems

struct StepResult {
  Trajectory trajectory;
  PowerAllocation powers;
  double bound = 0.0;  // optimal lower-bound objective
  int newton_steps = 0;
};

namespace detail {

constexpr double kPosScale = 100.0;  // m per scaled unit

inline bool has_targets(const Scenario& s, Problem problem) {
  return problem == Problem::sum_rate && (s.rate_targets[0] > 0.0 || s.rate_targets[1] > 0.0);
}

/// ψ = σ²/h = (σ²/β₀)(‖q − c‖² + Δz²) as a function of scaled coordinates.
struct PsiMap {
  double kappa = 0.0;  // σ²/β₀
  Vec2 centre;
  double dz2 = 0.0;

  double at(const Eigen::Vector2d& u) const {
    const double dx = kPosScale * u[0] - centre.x, dy = kPosScale * u[1] - centre.y;
    return kappa * (dx * dx + dy * dy + dz2);
  }
  Eigen::Vector2d grad(const Eigen::Vector2d& u) const {
    return 2.0 * kappa * kPosScale * Eigen::Vector2d(kPosScale * u[0] - centre.x, kPosScale * u[1] - centre.y);
  }
  double curvature() const { return 2.0 * kappa * kPosScale * kPosScale; }  // Hessian = curvature·I
};

/// c·log2(1 + γ_lb(u)) with γ_lb affine in (ψ_r, ψ_k) and ψ quadratic in u.
inline bool trajectory_term(const TrajectoryLB& lb, const PsiMap& r, const PsiMap& k, const Eigen::Vector2d& u,
                            double& v, Eigen::VectorXd& g, Eigen::MatrixXd& h) {
  const double gam = lb.sinr(r.at(u), k.at(u));
  if (!(1.0 + gam > 0.0)) return false;
  const Eigen::Vector2d dg = lb.d_r * r.grad(u) + lb.d_k * k.grad(u);
  const double hg = lb.d_r * r.curvature() + lb.d_k * k.curvature();
  const double w = lb.prefactor / std::numbers::ln2, x = 1.0 + gam;
  v = w * std::log1p(gam);
  g.head(2) = w * dg / x;
  h.topLeftCorner(2, 2) = w * (hg / x * Eigen::Matrix2d::Identity() - dg * dg.transpose() / (x * x));
  return true;
}

inline LocalTerm linear_term(std::vector<int> idx, std::vector<double> coef, double c0, std::string label) {
  return {std::move(idx), [coef = std::move(coef), c0](const Eigen::VectorXd& x, double& v, Eigen::VectorXd& g,
                                                       Eigen::MatrixXd&) {
            v = c0;
            for (std::size_t i = 0; i < coef.size(); ++i) {
              v += coef[i] * x[static_cast<Eigen::Index>(i)];
              g[static_cast<Eigen::Index>(i)] = coef[i];
            }
            return true;
          },
          std::move(label)};
}

/// r² − ‖a − b‖² over four scaled coordinates (a, b), or two when b is fixed.
inline LocalTerm step_term(std::vector<int> idx, Eigen::Vector2d fixed, double radius, std::string label) {
  const bool pair = idx.size() == 4;
  return {std::move(idx), [pair, fixed, r2 = radius * radius](const Eigen::VectorXd& x, double& v,
                                                               Eigen::VectorXd& g, Eigen::MatrixXd& h) {
            const Eigen::Vector2d d = x.head<2>() - (pair ? Eigen::Vector2d(x.segment<2>(2)) : fixed);
            v = r2 - d.squaredNorm();
            g.head(2) = -2.0 * d;
            h.topLeftCorner(2, 2) = -2.0 * Eigen::Matrix2d::Identity();
            if (pair) {
              g.segment(2, 2) = 2.0 * d;
              h.block(2, 2, 2, 2) = -2.0 * Eigen::Matrix2d::Identity();
              h.block(0, 2, 2, 2) = 2.0 * Eigen::Matrix2d::Identity();
              h.block(2, 0, 2, 2) = 2.0 * Eigen::Matrix2d::Identity();
            }
            return true;
          },
          std::move(label)};
}

inline std::string slot_label(const char* what, std::size_t n, std::size_t k = 9) {
  std::string s = what;
  s += " slot " + std::to_string(n + 1);
  if (k < kVehicles) s += " vehicle " + std::to_string(k + 1);
  return s;
}

}  // namespace detail

/// One trajectory subproblem: maximize the summed (or minimum) trajectory bound
/// at fixed powers and modes, anchored at `traj`. Throws InfeasibleError when
/// no strictly feasible trajectory exists (for instance V = 0).
inline StepResult trajectory_step(const Scenario& s, Problem problem, const Trajectory& traj,
                                  const PowerAllocation& powers, const ModeSchedule& modes,
                                  const SolverOptions& opt = {}) {
  const std::size_t N = traj.size();
  if (powers.size() != N || modes.size() != N) throw ConfigError("trajectory_step: slot counts differ");
  if (!(s.step_limit() > 0.0)) throw InfeasibleError("trajectory_step: the UAV cannot move (V = 0)");
  const ChannelState c = channel_state(traj, s);
  const double kappa = s.noise_power / s.beta0;
  const detail::PsiMap relay_map{kappa, {s.bs_position.x, s.bs_position.y},
                                 std::pow(s.uav_height - s.bs_position.z, 2)};
  const bool minrate = problem == Problem::min_rate;
  const int T = static_cast<int>(2 * N);

  ConcaveProgram prog;
  prog.dimension = static_cast<int>(2 * N) + (minrate ? 1 : 0);
  Eigen::VectorXd z0(prog.dimension);
  double worst = std::numeric_limits<double>::infinity();

  for (std::size_t n = 0; n < N; ++n) {
    const int ix = static_cast<int>(2 * n);
    z0[ix] = traj.points[n].x / detail::kPosScale;
    z0[ix + 1] = traj.points[n].y / detail::kPosScale;
    for (std::size_t k = 0; k < kVehicles; ++k) {
      const TrajectoryLB lb = trajectory_lb_build(modes.mode[n], k, powers.slots[n], c.psi_relay[n],
                                                  c.psi_vehicle[k][n], opt.bound_form);
      const detail::PsiMap vmap{kappa, vehicle_position(s, k, static_cast<int>(n) + 1), s.uav_height * s.uav_height};
      auto rate = [lb, relay_map, vmap](const Eigen::VectorXd& x, double& v, Eigen::VectorXd& g, Eigen::MatrixXd& h) {
        return detail::trajectory_term(lb, relay_map, vmap, x.head<2>(), v, g, h);
      };
      worst = std::min(worst, lb.prefactor * log2_1p(lb.gamma));
      if (minrate) {
        prog.constraints.push_back({{ix, ix + 1, T},
                                    [rate](const Eigen::VectorXd& x, double& v, Eigen::VectorXd& g,
                                           Eigen::MatrixXd& h) {
                                      if (!rate(x, v, g, h)) return false;
                                      v -= x[2];
                                      g[2] = -1.0;
                                      return true;
                                    },
                                    detail::slot_label("epigraph", n, k)});
        continue;
      }
      const double weight = 1.0 / static_cast<double>(N);
      prog.objective.push_back({{ix, ix + 1},
                                [rate, weight](const Eigen::VectorXd& x, double& v, Eigen::VectorXd& g,
                                               Eigen::MatrixXd& h) {
                                  if (!rate(x, v, g, h)) return false;
                                  v *= weight;
                                  g *= weight;
                                  h *= weight;
                                  return true;
                                },
                                detail::slot_label("rate", n, k)});
      if (detail::has_targets(s, problem) && s.rate_targets[k] > 0.0) {
        const double target = s.rate_targets[k];
        prog.constraints.push_back({{ix, ix + 1},
                                    [rate, target](const Eigen::VectorXd& x, double& v, Eigen::VectorXd& g,
                                                   Eigen::MatrixXd& h) {
                                      if (!rate(x, v, g, h)) return false;
                                      v -= target;
                                      return true;
                                    },
                                    detail::slot_label("rate target", n, k)});
      }
    }
    const FlightBox& b = s.flight_box;
    const double sc = detail::kPosScale;
    prog.constraints.push_back(detail::linear_term({ix}, {1.0}, -b.x_min / sc, detail::slot_label("box x_min", n)));
    prog.constraints.push_back(detail::linear_term({ix}, {-1.0}, b.x_max / sc, detail::slot_label("box x_max", n)));
    prog.constraints.push_back(detail::linear_term({ix + 1}, {1.0}, -b.y_min / sc, detail::slot_label("box y_min", n)));
    prog.constraints.push_back(detail::linear_term({ix + 1}, {-1.0}, b.y_max / sc, detail::slot_label("box y_max", n)));
  }
  const double radius = s.step_limit() / detail::kPosScale;
  const Eigen::Vector2d start(s.uav_start.x / detail::kPosScale, s.uav_start.y / detail::kPosScale);
  const Eigen::Vector2d end(s.uav_end.x / detail::kPosScale, s.uav_end.y / detail::kPosScale);
  prog.constraints.push_back(detail::step_term({0, 1}, start, radius, "speed from start"));
  for (std::size_t n = 1; n < N; ++n) {
    const int ix = static_cast<int>(2 * n);
    prog.constraints.push_back(detail::step_term({ix, ix + 1, ix - 2, ix - 1}, {}, radius, detail::slot_label("speed", n)));
  }
  const int last = static_cast<int>(2 * N - 2);
  prog.constraints.push_back(detail::step_term({last, last + 1}, end, radius, "speed to end"));
  if (minrate) {
    prog.objective.push_back(detail::linear_term({T}, {1.0}, 0.0, "t"));
    z0[T] = worst - 1.0;
  }

  const BarrierResult br = concave_max(prog, z0, opt.barrier);
  StepResult out;
  out.trajectory.points.resize(N);
  for (std::size_t n = 0; n < N; ++n)
    out.trajectory.points[n] = {br.z[static_cast<Eigen::Index>(2 * n)] * detail::kPosScale,
                                br.z[static_cast<Eigen::Index>(2 * n + 1)] * detail::kPosScale};
  out.powers = powers;
  out.bound = br.objective;
  out.newton_steps = br.newton_steps;
  return out;
}

/// One power subproblem at a fixed trajectory and modes, anchored at `powers`.
inline StepResult power_step(const Scenario& s, Problem problem, const Trajectory& traj,
                             const PowerAllocation& powers, const ModeSchedule& modes, const SolverOptions& opt = {}) {
  const std::size_t N = traj.size();
  if (powers.size() != N || modes.size() != N) throw ConfigError("power_step: slot counts differ");
  const ChannelState c = channel_state(traj, s);
  const bool minrate = problem == Problem::min_rate;
  const int T = static_cast<int>(3 * N);
  const Vec3d unit{s.avg_bs_power, s.avg_bs_power, s.avg_relay_power};

  ConcaveProgram prog;
  prog.dimension = T + (minrate ? 1 : 0);
  Eigen::VectorXd z0(prog.dimension);
  double worst = std::numeric_limits<double>::infinity();
  std::vector<int> bs_idx, relay_idx;

  for (std::size_t n = 0; n < N; ++n) {
    const int i0 = static_cast<int>(3 * n);
    const SlotPowers& a = powers.slots[n];
    z0[i0] = a.p1 / unit[0];
    z0[i0 + 1] = a.p2 / unit[1];
    z0[i0 + 2] = a.pr / unit[2];
    const Mode m = modes.mode[n];
    const NormalizedGains g = normalized_gains(m, slot_gains(c, n), s.noise_power);
    // Bounds need a non-negative anchor; clip round-off from the previous solve.
    const SlotPowers anchor{std::max(a.p1, 0.0), std::max(a.p2, 0.0), std::max(a.pr, 0.0)};
    for (std::size_t k = 0; k < kVehicles; ++k) {
      const PowerLB lb = power_lb_build(m, k, g, anchor, opt.bound_form);
      auto rate = [lb, unit](const Eigen::VectorXd& x, double& v, Eigen::VectorXd& gr, Eigen::MatrixXd& h) {
        Eval3 e;
        if (!power_lb_eval(lb, {x[0] * unit[0], x[1] * unit[1], x[2] * unit[2]}, e)) return false;
        v = e.value;
        for (int i = 0; i < 3; ++i) {
          gr[i] = e.grad[i] * unit[i];
          for (int j = 0; j < 3; ++j) h(i, j) = e.hess[i][j] * unit[i] * unit[j];
        }
        return true;
      };
      worst = std::min(worst, power_lb_rate(lb, anchor));
      if (minrate) {
        prog.constraints.push_back({{i0, i0 + 1, i0 + 2, T},
                                    [rate](const Eigen::VectorXd& x, double& v, Eigen::VectorXd& g,
                                           Eigen::MatrixXd& h) {
                                      if (!rate(x, v, g, h)) return false;
                                      v -= x[3];
                                      g[3] = -1.0;
                                      return true;
                                    },
                                    detail::slot_label("epigraph", n, k)});
        continue;
      }
      const double weight = 1.0 / static_cast<double>(N);
      prog.objective.push_back({{i0, i0 + 1, i0 + 2},
                                [rate, weight](const Eigen::VectorXd& x, double& v, Eigen::VectorXd& g,
                                               Eigen::MatrixXd& h) {
                                  if (!rate(x, v, g, h)) return false;
                                  v *= weight;
                                  g *= weight;
                                  h *= weight;
                                  return true;
                                },
                                detail::slot_label("rate", n, k)});
      if (detail::has_targets(s, problem) && s.rate_targets[k] > 0.0) {
        const double target = s.rate_targets[k];
        prog.constraints.push_back({{i0, i0 + 1, i0 + 2},
                                    [rate, target](const Eigen::VectorXd& x, double& v, Eigen::VectorXd& g,
                                                   Eigen::MatrixXd& h) {
                                      if (!rate(x, v, g, h)) return false;
                                      v -= target;
                                      return true;
                                    },
                                    detail::slot_label("rate target", n, k)});
      }
    }
    for (int i = 0; i < 3; ++i)
      prog.constraints.push_back(detail::linear_term({i0 + i}, {1.0}, 0.0, detail::slot_label("power >= 0", n)));
    if (!minrate && m == Mode::sic_at_vehicle1)
      prog.constraints.push_back(detail::linear_term({i0, i0 + 1}, {-1.0, 1.0}, 0.0, detail::slot_label("SIC", n)));
    if (!minrate && m == Mode::sic_at_vehicle2)
      prog.constraints.push_back(detail::linear_term({i0, i0 + 1}, {1.0, -1.0}, 0.0, detail::slot_label("SIC", n)));
    bs_idx.push_back(i0);
    bs_idx.push_back(i0 + 1);
    relay_idx.push_back(i0 + 2);
  }
  prog.constraints.push_back(detail::linear_term(bs_idx, std::vector<double>(bs_idx.size(), -1.0),
                                                 s.bs_energy() / s.avg_bs_power, "BS energy"));
  prog.constraints.push_back(detail::linear_term(relay_idx, std::vector<double>(relay_idx.size(), -1.0),
                                                 s.relay_energy() / s.avg_relay_power, "relay energy"));
  if (minrate) {
    prog.objective.push_back(detail::linear_term({T}, {1.0}, 0.0, "t"));
    z0[T] = worst - 1.0;
  }

  const BarrierResult br = concave_max(prog, z0, opt.barrier);
  StepResult out;
  out.trajectory = traj;
  out.powers.slots.resize(N);
  for (std::size_t n = 0; n < N; ++n) {
    const auto i0 = static_cast<Eigen::Index>(3 * n);
    out.powers.slots[n] = {br.z[i0] * unit[0], br.z[i0 + 1] * unit[1], br.z[i0 + 2] * unit[2]};
  }
  out.bound = br.objective;
  out.newton_steps = br.newton_steps;
  return out;
}

// ---------------------------------------------------------------------------
// Drivers

namespace detail {

struct Iterate {
  Trajectory traj;
  PowerAllocation powers;
  ModeSchedule modes;
  std::vector<SlotRates> rates;
  double objective = 0.0;
  double bound = 0.0;
};

inline ModeSchedule schedule_for(const Scenario& s, Problem problem, const Trajectory& t, const SolverOptions& opt) {
  const ChannelState c = channel_state(t, s);
  return problem == Problem::min_rate || opt.force_oma ? all_oma_schedule(c) : mode_schedule(c, s);
}

inline Iterate make_iterate(const Scenario& s, Problem problem, Trajectory t, PowerAllocation p, ModeSchedule m) {
  Iterate it{std::move(t), std::move(p), std::move(m), {}, 0.0, 0.0};
  it.rates = exact_rates(s, it.traj, it.powers, it.modes);
  it.objective = objective_of(problem, it.rates);
  return it;
}

inline bool acceptable(const Scenario& s, Problem problem, const Iterate& cand, const Iterate& cur) {
  if (!check_feasibility(s, problem, cand.traj, cand.powers, cand.modes, cand.rates).feasible()) return false;
  const double scale = std::max(1.0, std::abs(cur.objective));
  return cand.objective >= cur.objective - 1e-12 * scale && cand.bound >= cur.bound - 1e-9 * scale;
}

inline double relative_gain(double now, double before) {
  return (now - before) / std::max(std::abs(before), 1e-12);
}

inline SolverResult finish(Problem problem, Iterate&& it, SolverResult r,
                           std::chrono::steady_clock::time_point t0) {
  r.problem = problem;
  r.trajectory = std::move(it.traj);
  r.powers = std::move(it.powers);
  r.schedule = std::move(it.modes);
  r.rates = std::move(it.rates);
  r.objective = it.objective;
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

/// Alternating optimization shared by the joint sum-rate and the min-rate drivers.
/// Every accepted iterate is feasible at exact rates and does not lower the exact
/// or the bound objective; a rejected joint step falls back to a power-only step.
inline SolverResult alternate(const Scenario& s, Problem problem, Iterate cur, const SolverOptions& opt,
                              bool move_trajectory, bool move_powers, bool update_modes) {
  const auto t0 = std::chrono::steady_clock::now();
  SolverResult res;
  res.history.push_back(cur.objective);
  res.bound_history.push_back(cur.bound);
  bool frozen = !update_modes;
  const bool can_move = move_trajectory && s.step_limit() > 0.0;

  for (int it = 1; it <= opt.max_outer; ++it) {
    res.iterations = it;
    int newton = 0;
    bool accepted = false;
    Iterate next;

    if (can_move) {
      try {
        StepResult ts = trajectory_step(s, problem, cur.traj, cur.powers, cur.modes, opt);
        newton += ts.newton_steps;
        ModeSchedule modes = frozen ? cur.modes : schedule_for(s, problem, ts.trajectory, opt);
        double bound = ts.bound;
        PowerAllocation p = cur.powers;
        if (move_powers) {
          StepResult ps = power_step(s, problem, ts.trajectory, cur.powers, modes, opt);
          newton += ps.newton_steps;
          p = std::move(ps.powers);
          bound = ps.bound;
        }
        Iterate cand = make_iterate(s, problem, std::move(ts.trajectory), std::move(p), std::move(modes));
        cand.bound = bound;
        if (acceptable(s, problem, cand, cur)) {
          next = std::move(cand);
          accepted = true;
        } else {
          res.events.push_back("iteration " + std::to_string(it) + ": joint step rejected");
        }
      } catch (const Error& e) {
        res.events.push_back("iteration " + std::to_string(it) + ": joint step failed: " + e.what());
      }
    }
    if (!accepted && move_powers) {
      try {
        StepResult ps = power_step(s, problem, cur.traj, cur.powers, cur.modes, opt);
        newton += ps.newton_steps;
        Iterate cand = make_iterate(s, problem, cur.traj, std::move(ps.powers), cur.modes);
        cand.bound = ps.bound;
        if (acceptable(s, problem, cand, cur)) {
          next = std::move(cand);
          accepted = true;
        }
      } catch (const Error& e) {
        res.events.push_back("iteration " + std::to_string(it) + ": power step failed: " + e.what());
      }
    }
    res.newton_steps.push_back(newton);
    if (!accepted) {
      // Nothing improves on the current point: it is a fixed point of the scheme.
      res.converged = true;
      break;
    }
    const double gain = relative_gain(next.objective, cur.objective);
    cur = std::move(next);
    res.history.push_back(cur.objective);
    res.bound_history.push_back(cur.bound);
    if (gain < opt.rel_tol) {
      res.converged = true;
      break;
    }
    if (gain < opt.freeze_modes_below) frozen = true;
  }
  return finish(problem, std::move(cur), std::move(res), t0);
}

inline void require_feasible(const Scenario& s, Problem problem, const Iterate& it, const char* who) {
  const FeasibilityReport r = check_feasibility(s, problem, it.traj, it.powers, it.modes, it.rates);
  if (!r.feasible()) throw InfeasibleError(std::string(who) + ": infeasible start (" + r.summary() + ")");
}

}  // namespace detail

/// Trajectory optimization with fixed powers; modes follow the trajectory.
inline SolverResult algorithm1_trajectory(const Scenario& s, const PowerAllocation& powers, const Trajectory& traj0,
                                          const SolverOptions& opt = {}) {
  s.validate();
  detail::Iterate it = detail::make_iterate(s, Problem::sum_rate, traj0, powers,
                                            detail::schedule_for(s, Problem::sum_rate, traj0, opt));
  detail::require_feasible(s, Problem::sum_rate, it, "algorithm1_trajectory");
  it.bound = it.objective;
  if (opt.bound_form == BoundForm::convexified) it.bound = -std::numeric_limits<double>::infinity();
  return detail::alternate(s, Problem::sum_rate, std::move(it), opt, true, false, !opt.force_oma);
}

/// Power allocation with a fixed trajectory and the modes it induces.
inline SolverResult algorithm2_power(const Scenario& s, const Trajectory& traj, const PowerAllocation& powers0,
                                     const SolverOptions& opt = {}) {
  s.validate();
  detail::Iterate it = detail::make_iterate(s, Problem::sum_rate, traj, powers0,
                                            detail::schedule_for(s, Problem::sum_rate, traj, opt));
  detail::require_feasible(s, Problem::sum_rate, it, "algorithm2_power");
  it.bound = opt.bound_form == BoundForm::tight ? it.objective : -std::numeric_limits<double>::infinity();
  return detail::alternate(s, Problem::sum_rate, std::move(it), opt, false, true, false);
}

/// Min-rate problem: OMA in every slot, epigraph form in both blocks.
inline SolverResult solve_minrate(const Scenario& s, const SolverOptions& opt = {}) {
  s.validate();
  const Trajectory t0 = initial_trajectory(s);
  detail::Iterate it = detail::make_iterate(s, Problem::min_rate, t0, uniform_powers(s),
                                            all_oma_schedule(channel_state(t0, s)));
  detail::require_feasible(s, Problem::min_rate, it, "solve_minrate");
  it.bound = opt.bound_form == BoundForm::tight ? it.objective : -std::numeric_limits<double>::infinity();
  return detail::alternate(s, Problem::min_rate, std::move(it), opt, true, true, false);
}

/// Starting point of either problem. The min-rate start is the straight line
/// with uniform powers; the sum-rate start is the converged min-rate solution.
inline std::pair<Trajectory, PowerAllocation> feasible_init(const Scenario& s, Problem problem,
                                                            const SolverOptions& opt = {}) {
  s.validate();
  if (problem == Problem::min_rate) {
    Trajectory t = initial_trajectory(s);
    PowerAllocation p = uniform_powers(s);
    const auto m = all_oma_schedule(channel_state(t, s));
    const auto r = check_feasibility(s, problem, t, p, m, exact_rates(s, t, p, m));
    if (!r.feasible()) throw InfeasibleError("feasible_init: " + r.summary());
    return {std::move(t), std::move(p)};
  }
  SolverOptions o = opt;
  o.force_oma = false;
  SolverResult r2 = solve_minrate(s, o);
  for (std::size_t k = 0; k < kVehicles; ++k)
    if (s.rate_targets[k] > 0.0 && r2.objective < s.rate_targets[k])
      throw InfeasibleError("feasible_init: rate targets unreachable (best min-rate " + std::to_string(r2.objective) +
                            " bps/Hz)");
  return {std::move(r2.trajectory), std::move(r2.powers)};
}

/// Joint trajectory, power and mode optimization for the sum-rate problem.
inline SolverResult algorithm3_joint(const Scenario& s, const SolverOptions& opt = {}) {
  s.validate();
  const auto t0 = std::chrono::steady_clock::now();
  auto [traj, powers] = feasible_init(s, Problem::sum_rate, opt);
  std::vector<std::string> events;

  detail::Iterate it = detail::make_iterate(s, Problem::sum_rate, traj, powers,
                                            detail::schedule_for(s, Problem::sum_rate, traj, opt));
  if (!check_feasibility(s, Problem::sum_rate, it.traj, it.powers, it.modes, it.rates).feasible()) {
    // The min-rate powers need not respect SIC ordering in NOMA slots; repair with a power step.
    try {
      StepResult ps = power_step(s, Problem::sum_rate, it.traj, it.powers, it.modes, opt);
      it = detail::make_iterate(s, Problem::sum_rate, it.traj, std::move(ps.powers), std::move(it.modes));
    } catch (const Error& e) {
      events.push_back(std::string("initial power repair failed: ") + e.what());
    }
    if (!check_feasibility(s, Problem::sum_rate, it.traj, it.powers, it.modes, it.rates).feasible()) {
      events.push_back("starting from the all-OMA schedule");
      it = detail::make_iterate(s, Problem::sum_rate, traj, powers, all_oma_schedule(channel_state(traj, s)));
      detail::require_feasible(s, Problem::sum_rate, it, "algorithm3_joint");
    }
  }
  it.bound = opt.bound_form == BoundForm::tight ? it.objective : -std::numeric_limits<double>::infinity();
  SolverResult r = detail::alternate(s, Problem::sum_rate, std::move(it), opt, true, true, !opt.force_oma);
  events.insert(events.end(), r.events.begin(), r.events.end());
  r.events = std::move(events);
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace skyrelay
