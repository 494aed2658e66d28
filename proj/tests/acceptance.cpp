// Acceptance run: one PASS/FAIL line per criterion. Exits 0 once every
// criterion has been evaluated; the lines themselves carry the verdicts.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "skyrelay/finite_diff.hpp"
#include "skyrelay/io.hpp"
#include "skyrelay/oracle.hpp"
#include "skyrelay/sca.hpp"
#include "skyrelay/solver.hpp"

using namespace skyrelay;

namespace {

const std::string kDataDir = SKYRELAY_DATA_DIR;

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void run(int id, const char* name, const std::function<Verdict()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("threw: ") + e.what()};
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  failures += !v.pass;
  std::printf("%s %2d %s: %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str(), wall);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

template <class... Args>
std::string fmt(const char* f, Args... a) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

struct Rng {
  std::mt19937_64 gen;
  explicit Rng(unsigned seed) : gen(seed) {}
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(gen); }
  double log_uniform(double a, double b) { return std::exp(uniform(std::log(a), std::log(b))); }
  SlotPowers powers() { return {uniform(0.02, 1.0), uniform(0.02, 1.0), uniform(0.02, 1.0)}; }
  NormalizedGains gains() { return {log_uniform(5, 2000), {log_uniform(5, 2000), log_uniform(5, 2000)}}; }
};

constexpr Mode kModes[] = {Mode::sic_at_vehicle1, Mode::sic_at_vehicle2, Mode::oma};
constexpr BoundForm kForms[] = {BoundForm::convexified, BoundForm::tight};

Placement reference_geometry(const Scenario& s) {
  return {{250.0, 250.0}, {s.vehicle_initial[0].x, 400.0}, {s.vehicle_initial[1].x, 500.0}};
}

/// Random placements over the flight box with distinct vehicle gains.
std::vector<Placement> random_geometries(const Scenario& s, int count, unsigned seed) {
  Rng r(seed);
  std::vector<Placement> g;
  auto point = [&] { return Vec2{r.uniform(s.flight_box.x_min, s.flight_box.x_max),
                                 r.uniform(s.flight_box.y_min, s.flight_box.y_max)}; };
  while (static_cast<int>(g.size()) < count) {
    const Placement p{point(), point(), point()};
    const double h1 = channel_gain(p.uav, p.vehicle1, s.uav_height, s.beta0);
    const double h2 = channel_gain(p.uav, p.vehicle2, s.uav_height, s.beta0);
    if (rel_err(h1, h2) > 1e-6) g.push_back(p);
  }
  return g;
}

/// Lower-bound part of the power-side coefficient check: log2 of what the bound linearizes.
double subtracted_log(const PowerLB& lb, const SlotPowers& p) {
  if (lb.form == BoundForm::convexified) return dc_rate_parts(lb.mode, lb.vehicle, lb.gains, p).subtracted;
  const NormalizedGains& g = lb.gains;
  const std::size_t k = lb.vehicle;
  const double gk = g.vehicle[k], gr = g.relay;
  if (lb.mode == Mode::oma) return std::log2(p.pr * gk + 2 * p.vehicle(k) * gr + 2);
  const bool weak = (lb.mode == Mode::sic_at_vehicle1) == (k == 1);
  const double other = weak ? p.vehicle(1 - k) : 0.0;
  return std::log2(p.pr * gk * gr * other + p.pr * gk + p.bs_total() * gr + 1);
}

std::string slot_csv(const SolverResult& r) {
  std::ostringstream out;
  write_slot_csv(out, r.trajectory, r.powers, r.schedule, r.rates);
  return out.str();
}

struct Runs {
  Scenario desk = Scenario::default_deployment().with_slots(50);
  SolverResult sum, min;
  double sum_wall = 0.0, min_wall = 0.0;
};

const Runs& desk_runs() {
  static const Runs runs = [] {
    Runs r;
    auto t0 = std::chrono::steady_clock::now();
    r.sum = algorithm3_joint(r.desk);
    auto t1 = std::chrono::steady_clock::now();
    r.min = solve_minrate(r.desk);
    auto t2 = std::chrono::steady_clock::now();
    r.sum_wall = std::chrono::duration<double>(t1 - t0).count();
    r.min_wall = std::chrono::duration<double>(t2 - t1).count();
    return r;
  }();
  return runs;
}

bool monotone(const std::vector<double>& h, double tol) {
  for (std::size_t i = 1; i < h.size(); ++i)
    if (h[i] < h[i - 1] - tol) return false;
  return true;
}

double last_gain(const std::vector<double>& h) {
  if (h.size() < 2) return 0.0;
  const double a = h[h.size() - 2], b = h.back();
  return (b - a) / std::max(std::abs(a), 1e-12);
}

}  // namespace

int main() {
  const Scenario base = Scenario::default_deployment();

  run(1, "high-SNR approximation fidelity", [&] {
    const auto rep = highsnr_proposition_suite(base, {reference_geometry(base)}, {23.0, 25.0, 28.0, 30.0});
    double worst = 0.0, worst_dbm = 0.0;
    const char* worst_name = "";
    const char* names[2][2] = {{"NOMA sum", "NOMA min"}, {"OMA sum", "OMA min"}};
    for (const auto& row : rep.rows)
      for (int sc = 0; sc < 2; ++sc)
        for (int ob = 0; ob < 2; ++ob)
          if (row.gap(Scheme(sc), Objective(ob)) > worst) {
            worst = row.gap(Scheme(sc), Objective(ob));
            worst_dbm = row.dbm;
            worst_name = names[sc][ob];
          }
    return Verdict{worst <= 0.2, fmt("largest |exact - high-SNR| = %.4f bps/Hz (%s at %g dBm), limit 0.2", worst,
                                     worst_name, worst_dbm)};
  });

  const auto geoms = random_geometries(base, 1000, 2024);
  const double P30 = dbm_to_watts(30.0), rho30 = P30 / base.noise_power;
  auto gains_of = [&](const Placement& pl) {
    return SlotGains{relay_gain(base, pl.uav),
                     {channel_gain(pl.uav, pl.vehicle1, base.uav_height, base.beta0),
                      channel_gain(pl.uav, pl.vehicle2, base.uav_height, base.beta0)}};
  };
  // Geometries where every link SNR is at least 20 dB, reported for context.
  auto high_snr = [&](const SlotGains& g) { return rho30 * std::min({g.relay, g.vehicle[0], g.vehicle[1]}) >= 100.0; };

  run(2, "NOMA sum rate not below OMA", [&] {
    double worst = INFINITY, worst3 = 0.0;
    int case3 = 0, bad = 0, bad3 = 0, bad3_hi = 0, hi = 0;
    for (const Placement& pl : geoms) {
      const SlotGains g = gains_of(pl);
      const double d = noma_best_sum(g, P30, base.noise_power) -
                       slot_rates(Mode::oma, g, {P30 / 2, P30 / 2, P30}, base.noise_power).sum();
      worst = std::min(worst, d);
      bad += d < -0.05;
      hi += high_snr(g);
      if (g.relay < std::min(g.vehicle[0], g.vehicle[1])) {
        ++case3;
        worst3 = std::max(worst3, std::abs(d));
        bad3 += std::abs(d) > 0.1;
        bad3_hi += std::abs(d) > 0.1 && high_snr(g);
      }
    }
    return Verdict{bad == 0 && bad3 == 0,
                   fmt("min(NOMA - OMA) = %.4f, %d below -0.05; relay-weakest %d geometries, %d with |gap| > 0.1 "
                       "(max %.4f), %d of them among the %d geometries with every link SNR >= 20 dB",
                       worst, bad, case3, bad3, worst3, bad3_hi, hi)};
  });

  run(3, "OMA min rate not below NOMA", [&] {
    std::size_t checked = 0, bad = 0, bad_hi = 0;
    double worst = INFINITY;
    for (const Placement& pl : geoms) {
      const SlotGains g = gains_of(pl);
      const double oma = slot_rates(Mode::oma, g, {P30 / 2, P30 / 2, P30}, base.noise_power).min();
      for (double split : {2.0, 5.0, 10.0}) {
        const double f = 1.0 / (1.0 + split);
        const auto r = detail::noma_pair(g, f * P30, (1.0 - f) * P30, P30, base.noise_power);
        const double d = oma - std::min(r[0], r[1]);
        worst = std::min(worst, d);
        ++checked;
        bad += d < 0.0;
        bad_hi += d < 0.0 && high_snr(g);
      }
    }
    return Verdict{bad == 0, fmt("%zu of %zu (geometry, split) pairs violate, %zu of them with every link SNR >= 20 dB; "
                                 "min(OMA - NOMA) = %.4f",
                                 bad, checked, bad_hi, worst)};
  });

  run(4, "bound coefficients vs finite differences", [&] {
    Rng r(404);
    double worst = 0.0, worst_eig = 0.0;
    int instances = 0, certified = 0;
    for (BoundForm form : kForms)
      for (Mode m : kModes)
        for (std::size_t k = 0; k < 2; ++k)
          for (int i = 0; i < 500; ++i) {
            ++instances;
            const SlotPowers p = r.powers();
            const double psr = r.log_uniform(1e-3, 1), psk = r.log_uniform(1e-3, 1);
            const TrajectoryLB lb = trajectory_lb_build(m, k, p, psr, psk, form);
            const FdGradient gt = finite_diff_gradient(
                [&](const std::vector<double>& v) { return lb.target.value(v[0], v[1]); }, {psr, psk});
            worst = std::max({worst, rel_err(lb.d_r, gt.value[0]), rel_err(lb.d_k, gt.value[1])});

            const NormalizedGains g = r.gains();
            const PowerLB pl = power_lb_build(m, k, g, p, form);
            const FdGradient gp = finite_diff_gradient(
                [&](const std::vector<double>& v) { return subtracted_log(pl, {v[0], v[1], v[2]}); },
                {p.p1, p.p2, p.pr});
            const double coef[3] = {pl.d, pl.t, pl.c};
            for (int j = 0; j < 3; ++j)
              worst = std::max(worst, coef[j] == 0.0 ? std::abs(gp.value[j]) : rel_err(coef[j], gp.value[j]));

            // Curvature of certified convexified SINR models, normalized by the Hessian size.
            if (form != BoundForm::convexified) continue;
            const SinrModel s = convexified_sinr_model(m, k, p);
            if (lemma1_certificate(s.a, s.b, s.c, s.e, psr, psk) != Certificate::convex) continue;
            ++certified;
            const FdHessian h =
                finite_diff_hessian([&](const std::vector<double>& v) { return s.value(v[0], v[1]); }, {psr, psk});
            Eigen::Matrix2d hm;
            hm << h.value[0][0], h.value[0][1], h.value[1][0], h.value[1][1];
            const double eig = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(hm).eigenvalues().minCoeff();
            worst_eig = std::min(worst_eig, eig / hm.norm());
          }
    return Verdict{worst <= 1e-5 && worst_eig >= -1e-6 && certified > 0,
                   fmt("%d instances, max relative error %.2e (limit 1e-5); %d certified Hessians, "
                       "min eigenvalue/|H| %.2e (limit -1e-6)",
                       instances, worst, certified, worst_eig)};
  });

  run(5, "minorization and anchoring", [&] {
    Rng r(505);
    double anchor = 0.0, excess = -INFINITY;
    long trials = 0;
    for (BoundForm form : kForms)
      for (Mode m : kModes)
        for (std::size_t k = 0; k < 2; ++k) {
          const SlotPowers p = r.powers();
          const double psr = r.log_uniform(1e-3, 1), psk = r.log_uniform(1e-3, 1);
          const TrajectoryLB lb = trajectory_lb_build(m, k, p, psr, psk, form);
          anchor = std::max(anchor, rel_err(trajectory_lb_rate(lb, psr, psk), trajectory_target_rate(lb, psr, psk)));
          const PowerLB pl = power_lb_build(m, k, r.gains(), p, form);
          anchor = std::max(anchor, rel_err(power_lb_rate(pl, p), power_target_rate(pl, p)));
          for (int i = 0; i < 10000; ++i) {
            const double a = psr * r.log_uniform(0.05, 20), b = psk * r.log_uniform(0.05, 20);
            if (1.0 + lb.sinr(a, b) > 0.0) {
              const double t = trajectory_target_rate(lb, a, b);
              excess = std::max(excess, (trajectory_lb_rate(lb, a, b) - t) / std::max(std::abs(t), 1e-12));
              ++trials;
            }
            const SlotPowers q{r.uniform(1e-4, 2), r.uniform(1e-4, 2), r.uniform(1e-4, 2)};
            const double t = power_target_rate(pl, q);
            excess = std::max(excess, (power_lb_rate(pl, q) - t) / std::max(std::abs(t), 1e-12));
            ++trials;
          }
        }
    return Verdict{anchor <= 1e-12 && excess <= 1e-12,
                   fmt("anchor relative error %.2e (limit 1e-12); %ld trial points, max (bound - target)/|target| "
                       "%.2e (limit 1e-12)",
                       anchor, trials, excess)};
  });

  run(6, "convergence at N = 50", [&] {
    const Runs& d = desk_runs();
    bool ok = true;
    std::string text;
    for (const SolverResult* r : {&d.sum, &d.min}) {
      const double wall = r == &d.sum ? d.sum_wall : d.min_wall;
      const bool good = r->converged && r->iterations <= 30 && monotone(r->bound_history, 1e-9) &&
                        last_gain(r->history) < 1e-4 && wall < 60.0;
      ok &= good;
      text += fmt("%s: %d iterations, converged %s, final gain %.1e, bound monotone %s, %.1f s; ",
                  to_string(r->problem), r->iterations, r->converged ? "yes" : "no", last_gain(r->history),
                  monotone(r->bound_history, 1e-9) ? "yes" : "no", wall);
    }
    return Verdict{ok, text.substr(0, text.size() - 2)};
  });

  run(7, "single-slot gap to the grid optimum", [&] {
    Scenario s = base.with_slots(1);
    const Placement pl = reference_geometry(s);
    s.vehicle_initial = {pl.vehicle1, pl.vehicle2};
    s.vehicle_velocity = {Vec2{0.0, 0.0}, Vec2{0.0, 0.0}};
    s.uav_start = s.uav_end = pl.uav;
    s.uav_max_speed = 1e5;  // the whole box is one step away
    bool ok = true;
    std::string text;
    for (Objective ob : {Objective::sum, Objective::min}) {
      OracleOptions o;
      o.objective = ob;
      const OracleResult grid = static_placement_oracle(s, o);
      const SolverResult r = ob == Objective::sum ? algorithm3_joint(s) : solve_minrate(s);
      const double gap = (grid.objective - r.objective) / grid.objective;
      ok &= gap <= 0.10;
      text += fmt("%s grid %.4f at (%g, %g), solver %.4f at (%.1f, %.1f), gap %.2f%%; ",
                  ob == Objective::sum ? "sum" : "min", grid.objective, grid.position.x, grid.position.y,
                  r.objective, r.trajectory.points[0].x, r.trajectory.points[0].y, 100.0 * gap);
    }
    return Verdict{ok, text + "limit 10%"};
  });

  run(8, "deployment optimum", [&] {
    OracleOptions o;
    o.objective = Objective::sum;
    const OracleResult r = static_placement_oracle(base, o);
    return Verdict{std::abs(r.position.x - 354.0) <= 10.0,
                   fmt("grid optimum (%g, %g) m, sum rate %.4f bps/Hz; x must lie in [344, 364]", r.position.x,
                       r.position.y, r.objective)};
  });

  run(9, "min-rate fairness", [&] {
    const Runs& d = desk_runs();
    double worst = 0.0;
    for (const SlotRates& x : d.min.rates)
      worst = std::max(worst, std::abs(x.rate[0] - x.rate[1]) / std::max(x.rate[0], x.rate[1]));
    return Verdict{d.min.converged && worst <= 0.05,
                   fmt("max per-slot |R1 - R2|/max = %.2e over %zu slots (limit 5%%)", worst, d.min.rates.size())};
  });

  run(10, "OMA share grows with the threshold", [&] {
    const Runs& d = desk_runs();
    const ChannelState ch = channel_state(d.sum.trajectory, d.desk);
    double prev = -1.0;
    bool ok = true;
    std::string text = "OMA share";
    for (double th : {0.0, 0.1, 0.3, 1.0}) {
      const double share = mode_schedule(ch, th).mode_fractions()[2];
      ok &= share >= prev;
      prev = share;
      text += fmt(" %.2f", share);
    }
    return Verdict{ok, text + " at thresholds 0, 0.1, 0.3, 1.0"};
  });

  run(11, "feasibility and golden CSV", [&] {
    const Runs& d = desk_runs();
    bool ok = true;
    std::string text;
    for (const SolverResult* r : {&d.sum, &d.min}) {
      const auto f = check_feasibility(d.desk, r->problem, r->trajectory, r->powers, r->schedule, r->rates);
      ok &= f.feasible();
      text += std::string(to_string(r->problem)) + " " + f.summary() + "; ";
    }
    const std::string first = slot_csv(d.sum), again = slot_csv(algorithm3_joint(d.desk));
    const bool stable = first == again;
    ok &= stable;
    text += stable ? "repeat run bit-identical; " : "repeat run differs; ";

    const std::string golden_path = kDataDir + "/golden/default_n50_sumrate.csv";
    std::ifstream in(golden_path);
    std::stringstream golden;
    golden << in.rdbuf();
    if (!in) {
      ok = false;
      text += "missing " + golden_path;
    } else if (golden.str() == first) {
      text += "matches the stored golden file exactly";
    } else {
      // Pinned tolerance for other toolchains: integer columns exact, reals within 1e-9 relative.
      std::istringstream a(first), b(golden.str());
      std::string la, lb;
      double worst = 0.0;
      bool same_shape = true;
      while (std::getline(a, la)) {
        if (!std::getline(b, lb)) same_shape = false;
        std::istringstream ca(la), cb(lb);
        std::string xa, xb;
        while (std::getline(ca, xa, ',')) {
          if (!std::getline(cb, xb, ',')) same_shape = false;
          if (xa == xb) continue;
          try {
            worst = std::max(worst, rel_err(std::stod(xa), std::stod(xb)));
          } catch (const std::exception&) {
            same_shape = false;
          }
        }
      }
      if (std::getline(b, lb)) same_shape = false;
      const bool close = same_shape && worst <= 1e-9;
      ok &= close;
      text += fmt("golden file differs, max relative difference %.2e (limit 1e-9)", worst);
    }
    return Verdict{ok, text};
  });

  std::printf("%d of 11 criteria failed\n", failures);
  return 0;
}
