#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>
#include <vector>

#include "skyrelay/error.hpp"
#include "skyrelay/finite_diff.hpp"
#include "skyrelay/mode_select.hpp"
#include "skyrelay/rates.hpp"
#include "skyrelay/scenario.hpp"

namespace skyrelay {

// ---------------------------------------------------------------------------
// Static placement search
// ---------------------------------------------------------------------------

/// How the oracle enumerates BS powers in a slot. The relay always transmits
/// at its average power since every rate is increasing in p_r.
enum class PowerGrid {
  automatic,     // pairs for a single slot, budget_split otherwise
  pairs,         // all (p1, p2) on the grid with p1 + p2 <= P_s
  budget_split,  // p1 + p2 = P_s, split on the grid
};

struct OracleOptions {
  Objective objective = Objective::sum;
  double xy_step = 5.0;       // m
  double power_step = 0.01;   // fraction of the average BS power
  PowerGrid power_grid = PowerGrid::automatic;
  bool rate_targets = true;   // sum objective only
  unsigned threads = 0;       // 0: hardware concurrency
};

struct OracleResult {
  Vec2 position;
  std::vector<SlotPowers> powers;  // per slot
  std::vector<ModeChoice> modes;
  double objective = -std::numeric_limits<double>::infinity();  // mean per-slot sum, or min over slots
  std::size_t grid_index = 0;  // ix * ny + iy
  std::size_t evaluated = 0;
  bool feasible() const { return std::isfinite(objective); }
};

namespace detail {

inline std::vector<double> grid_axis(double lo, double hi, double step) {
  if (!(step > 0.0)) throw ConfigError("oracle: grid step must be positive");
  if (hi < lo) throw ConfigError("oracle: empty grid");
  std::vector<double> v;
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) v.push_back(lo + static_cast<double>(i) * step);
  return v;
}

struct SlotBest {
  double value = -std::numeric_limits<double>::infinity();
  SlotPowers powers;
  ModeChoice mode;
};

/// Best powers on the grid for one slot; -inf when no grid point is admissible.
inline SlotBest best_slot(const SlotGains& g, const Scenario& s, const OracleOptions& opt,
                          const std::vector<std::pair<double, double>>& pairs) {
  SlotBest best;
  const bool sum = opt.objective == Objective::sum;
  best.mode = sum ? select_mode(g.relay, g.vehicle[0], g.vehicle[1], s.mode_threshold) : ModeChoice{5, Mode::oma};
  const Mode m = best.mode.mode;
  for (const auto& [p1, p2] : pairs) {
    if (m == Mode::sic_at_vehicle1 && p2 < p1) continue;
    if (m == Mode::sic_at_vehicle2 && p1 < p2) continue;
    const SlotPowers p{p1, p2, s.avg_relay_power};
    const SlotRates r = slot_rates(m, g, p, s.noise_power);
    if (sum && opt.rate_targets && (r.rate[0] < s.rate_targets[0] || r.rate[1] < s.rate_targets[1])) continue;
    const double v = sum ? r.sum() : r.min();
    if (v > best.value) {
      best.value = v;
      best.powers = p;
    }
  }
  return best;
}

}  // namespace detail

/// Exhaustive search for a hovering UAV over the flight box. Each slot's powers
/// are picked independently on the grid, which meets the energy budgets with
/// equality. Sum uses mode-table modes and SIC ordering; min uses OMA throughout.
/// Trajectory constraints are not imposed. Ties go to the smallest grid index.
inline OracleResult static_placement_oracle(const Scenario& s, const OracleOptions& opt = {}) {
  s.validate();
  const auto xs = detail::grid_axis(s.flight_box.x_min, s.flight_box.x_max, opt.xy_step);
  const auto ys = detail::grid_axis(s.flight_box.y_min, s.flight_box.y_max, opt.xy_step);
  if (!(opt.power_step > 0.0) || opt.power_step > 1.0) throw ConfigError("oracle: power_step must be in (0, 1]");

  PowerGrid mode = opt.power_grid;
  if (mode == PowerGrid::automatic) mode = s.slot_count == 1 ? PowerGrid::pairs : PowerGrid::budget_split;
  const auto steps = static_cast<int>(std::round(1.0 / opt.power_step));
  std::vector<std::pair<double, double>> pairs;
  for (int i = 0; i <= steps; ++i) {
    const double p1 = s.avg_bs_power * i / steps;
    if (mode == PowerGrid::budget_split) {
      pairs.emplace_back(p1, s.avg_bs_power * (steps - i) / steps);
      continue;
    }
    for (int j = 0; i + j <= steps; ++j) pairs.emplace_back(p1, s.avg_bs_power * j / steps);
  }

  const auto n_slots = static_cast<std::size_t>(s.slot_count);
  std::array<std::vector<Vec2>, kVehicles> vehicles;
  for (std::size_t k = 0; k < kVehicles; ++k)
    for (int n = 1; n <= s.slot_count; ++n) vehicles[k].push_back(vehicle_position(s, k, n));

  auto evaluate = [&](std::size_t ix, std::size_t iy, OracleResult& out, bool keep) {
    const Vec2 q{xs[ix], ys[iy]};
    const double hr = relay_gain(s, q);
    double total = 0.0, worst = std::numeric_limits<double>::infinity();
    if (keep) {
      out.powers.clear();
      out.modes.clear();
    }
    for (std::size_t n = 0; n < n_slots; ++n) {
      SlotGains g{hr, {}};
      for (std::size_t k = 0; k < kVehicles; ++k) g.vehicle[k] = channel_gain(q, vehicles[k][n], s.uav_height, s.beta0);
      const detail::SlotBest b = detail::best_slot(g, s, opt, pairs);
      if (!std::isfinite(b.value)) return -std::numeric_limits<double>::infinity();
      total += b.value;
      worst = std::min(worst, b.value);
      if (keep) {
        out.powers.push_back(b.powers);
        out.modes.push_back(b.mode);
      }
    }
    return opt.objective == Objective::sum ? total / static_cast<double>(n_slots) : worst;
  };

  const std::size_t nx = xs.size(), ny = ys.size();
  unsigned workers = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, nx));
  struct Partial {
    double value = -std::numeric_limits<double>::infinity();
    std::size_t index = 0;
  };
  std::vector<Partial> partial(workers);
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        OracleResult scratch;
        for (std::size_t ix = w; ix < nx; ix += workers)
          for (std::size_t iy = 0; iy < ny; ++iy) {
            const double v = evaluate(ix, iy, scratch, false);
            const std::size_t idx = ix * ny + iy;
            if (v > partial[w].value || (v == partial[w].value && idx < partial[w].index && std::isfinite(v)))
              partial[w] = {v, idx};
          }
      });
  }

  OracleResult best;
  best.evaluated = nx * ny;
  for (const Partial& p : partial) {
    if (!std::isfinite(p.value)) continue;
    if (p.value > best.objective || (p.value == best.objective && p.index < best.grid_index)) {
      best.objective = p.value;
      best.grid_index = p.index;
    }
  }
  if (!best.feasible()) throw InfeasibleError("oracle: no grid point meets the rate targets");
  const std::size_t ix = best.grid_index / ny, iy = best.grid_index % ny;
  best.position = {xs[ix], ys[iy]};
  evaluate(ix, iy, best, true);
  return best;
}

// ---------------------------------------------------------------------------
// High-SNR comparison suite
// ---------------------------------------------------------------------------

struct Placement {
  Vec2 uav;
  Vec2 vehicle1;
  Vec2 vehicle2;
};

struct HighSnrOptions {
  double noma_sum_split = 10.0;                 // p_weak / p_strong for the sum rows
  std::vector<double> min_splits{2.0, 5.0, 10.0};  // splits checked against OMA min
  double flag_above_dbm = 22.0;
  double sum_slack = 0.05;
};

/// Exact and approximate rates indexed [scheme][objective], scheme 0 = NOMA.
struct HighSnrRow {
  std::size_t geometry = 0;
  double dbm = 0.0;
  int ordering_case = 0;  // 1: relay strongest, 2: relay between, 3: relay weakest
  double exact[2][2]{};
  double approx[2][2]{};
  double fair_split = 0.0;  // p_weak / p_strong at the NOMA max-min point
  bool sum_order_violated = false;
  bool min_order_violated = false;

  double gap(Scheme sc, Objective ob) const {
    return std::abs(exact[int(sc)][int(ob)] - approx[int(sc)][int(ob)]);
  }
};

struct HighSnrReport {
  std::vector<HighSnrRow> rows;
  std::size_t sum_violations = 0;
  std::size_t min_violations = 0;
};

namespace detail {

/// NOMA rates with SIC at the stronger vehicle; returns {strong, weak}.
inline std::array<double, 2> noma_pair(const SlotGains& g, double p_strong, double p_weak, double pr, double noise) {
  const bool first = g.vehicle[0] >= g.vehicle[1];
  const SlotPowers p = first ? SlotPowers{p_strong, p_weak, pr} : SlotPowers{p_weak, p_strong, pr};
  const SlotRates r = slot_rates(first ? Mode::sic_at_vehicle1 : Mode::sic_at_vehicle2, g, p, noise);
  return first ? std::array{r.rate[0], r.rate[1]} : std::array{r.rate[1], r.rate[0]};
}

/// Strong-vehicle power fraction where both NOMA rates coincide, by bisection.
inline double fair_strong_fraction(const SlotGains& g, double P, double noise) {
  double lo = 0.0, hi = 0.5;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double f = 0.5 * (lo + hi);
    const auto r = noma_pair(g, f * P, (1.0 - f) * P, P, noise);
    (r[0] < r[1] ? lo : hi) = f;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Largest NOMA sum rate over strong-vehicle fractions k/steps·½, i.e. every
/// split that keeps the SIC ordering (weak vehicle gets at least half).
inline double noma_best_sum(const SlotGains& g, double P, double noise, int steps = 1000) {
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= steps; ++i) {
    const double f = 0.5 * i / steps;
    const auto r = detail::noma_pair(g, f * P, (1.0 - f) * P, P, noise);
    best = std::max(best, r[0] + r[1]);
  }
  return best;
}

/// Exact versus high-SNR rates with P watts at the BS and at the relay.
/// NOMA decodes at the stronger vehicle; OMA splits the BS power equally.
inline HighSnrReport highsnr_proposition_suite(const Scenario& s, const std::vector<Placement>& geometries,
                                               const std::vector<double>& dbm_sweep, const HighSnrOptions& opt = {}) {
  HighSnrReport rep;
  constexpr int N = int(Scheme::noma), O = int(Scheme::oma), S = int(Objective::sum), M = int(Objective::min);
  for (std::size_t gi = 0; gi < geometries.size(); ++gi) {
    const Placement& pl = geometries[gi];
    const SlotGains g{relay_gain(s, pl.uav),
                      {channel_gain(pl.uav, pl.vehicle1, s.uav_height, s.beta0),
                       channel_gain(pl.uav, pl.vehicle2, s.uav_height, s.beta0)}};
    if (g.vehicle[0] == g.vehicle[1]) throw DomainError("highsnr suite: vehicle gains must differ");
    const double strong = std::max(g.vehicle[0], g.vehicle[1]), weak = std::min(g.vehicle[0], g.vehicle[1]);
    for (double dbm : dbm_sweep) {
      HighSnrRow row;
      row.geometry = gi;
      row.dbm = dbm;
      row.ordering_case = g.relay >= strong ? 1 : (g.relay > weak ? 2 : 3);
      const double P = dbm_to_watts(dbm), rho = P / s.noise_power;
      const HighSnrGains hg{rho * g.relay, rho * g.vehicle[0], rho * g.vehicle[1]};

      const double f_sum = 1.0 / (1.0 + opt.noma_sum_split);
      const auto ns = detail::noma_pair(g, f_sum * P, (1.0 - f_sum) * P, P, s.noise_power);
      row.exact[N][S] = ns[0] + ns[1];
      row.approx[N][S] = high_snr_rate(Scheme::noma, Objective::sum, hg);

      const double f_fair = detail::fair_strong_fraction(g, P, s.noise_power);
      const auto nm = detail::noma_pair(g, f_fair * P, (1.0 - f_fair) * P, P, s.noise_power);
      row.fair_split = (1.0 - f_fair) / f_fair;
      row.exact[N][M] = std::min(nm[0], nm[1]);
      row.approx[N][M] = std::log2(row.fair_split);

      const SlotRates oma = slot_rates(Mode::oma, g, {P / 2, P / 2, P}, s.noise_power);
      row.exact[O][S] = oma.sum();
      row.exact[O][M] = oma.min();
      row.approx[O][S] = high_snr_rate(Scheme::oma, Objective::sum, hg);
      row.approx[O][M] = high_snr_rate(Scheme::oma, Objective::min, hg);

      if (dbm > opt.flag_above_dbm) {
        row.sum_order_violated = row.exact[N][S] < row.exact[O][S] - opt.sum_slack;
        for (double split : opt.min_splits) {
          const double f = 1.0 / (1.0 + split);
          const auto r = detail::noma_pair(g, f * P, (1.0 - f) * P, P, s.noise_power);
          if (std::min(r[0], r[1]) > row.exact[O][M]) row.min_order_violated = true;
        }
      }
      rep.sum_violations += row.sum_order_violated;
      rep.min_violations += row.min_order_violated;
      rep.rows.push_back(row);
    }
  }
  return rep;
}

}  // namespace skyrelay
