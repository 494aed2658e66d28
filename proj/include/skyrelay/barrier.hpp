#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "skyrelay/error.hpp"

namespace skyrelay {

/// A scalar function of a few coordinates of the decision vector.
///
/// `eval` receives the local coordinates and fills value, gradient and
/// Hessian (sized to the index list); it returns false outside the domain.
struct LocalTerm {
  using Eval = std::function<bool(const Eigen::VectorXd& x, double& value, Eigen::VectorXd& grad,
                                  Eigen::MatrixXd& hess)>;
  std::vector<int> index;
  Eval eval;
  std::string label;
};

/// maximize Σ objective(z) subject to constraint_i(z) >= 0, all terms concave.
struct ConcaveProgram {
  int dimension = 0;
  std::vector<LocalTerm> objective;
  std::vector<LocalTerm> constraints;
};

struct BarrierOptions {
  double mu_final = 1e-8;          // last barrier weight
  double mu_factor = 10.0;         // μ ← μ / factor per stage
  double newton_tol = 1e-14;       // stop centring once λ²/2 falls below this
  int max_newton_per_stage = 200;
  int max_halvings = 60;
  double armijo = 0.25;
  double phase1_margin = 1e-6;     // required slack before leaving phase I
  double phase1_proximal = 1e-3;   // weight of ½‖z − start‖² in phase I
};

struct BarrierResult {
  Eigen::VectorXd z;
  double objective = 0.0;
  int newton_steps = 0;
  int stages = 0;
  double mu = 0.0;
  double decrement = 0.0;  // last Newton decrement λ²
  bool line_search_failed = false;
  std::string diagnostic;
};

namespace detail {

struct BarrierEval {
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

inline bool eval_term(const LocalTerm& t, const Eigen::VectorXd& z, double& v, Eigen::VectorXd& g,
                      Eigen::MatrixXd& h) {
  const auto m = static_cast<Eigen::Index>(t.index.size());
  Eigen::VectorXd x(m);
  for (Eigen::Index i = 0; i < m; ++i) x[i] = z[t.index[static_cast<std::size_t>(i)]];
  g.setZero(m);
  h.setZero(m, m);
  v = 0.0;
  if (!t.eval(x, v, g, h)) return false;
  return std::isfinite(v);
}

inline void scatter(const LocalTerm& t, double w, const Eigen::VectorXd& g, const Eigen::MatrixXd& h,
                    BarrierEval& out, bool with_hessian) {
  const std::size_t m = t.index.size();
  for (std::size_t i = 0; i < m; ++i) {
    out.grad[t.index[i]] += w * g[static_cast<Eigen::Index>(i)];
    if (!with_hessian) continue;
    for (std::size_t j = 0; j < m; ++j)
      out.hess(t.index[i], t.index[j]) += w * h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
}

/// φ(z) = Σ f(z) + μ Σ log g(z); false outside the domain or strict feasibility.
inline bool barrier_eval(const ConcaveProgram& p, const Eigen::VectorXd& z, double mu, BarrierEval& out,
                         bool derivatives) {
  const int n = p.dimension;
  out.value = 0.0;
  if (derivatives) {
    out.grad.setZero(n);
    out.hess.setZero(n, n);
  }
  Eigen::VectorXd g;
  Eigen::MatrixXd h;
  double v;
  for (const auto& t : p.objective) {
    if (!eval_term(t, z, v, g, h)) return false;
    out.value += v;
    if (derivatives) scatter(t, 1.0, g, h, out, true);
  }
  for (const auto& t : p.constraints) {
    if (!eval_term(t, z, v, g, h) || !(v > 0.0)) return false;
    out.value += mu * std::log(v);
    if (!derivatives) continue;
    // μ ∇g/g and μ (∇²g/g − ∇g∇gᵀ/g²)
    const Eigen::MatrixXd local = h / v - (g * g.transpose()) / (v * v);
    scatter(t, mu, g / v, local, out, true);
  }
  return std::isfinite(out.value);
}

inline double objective_value(const ConcaveProgram& p, const Eigen::VectorXd& z) {
  double total = 0.0, v;
  Eigen::VectorXd g;
  Eigen::MatrixXd h;
  for (const auto& t : p.objective) {
    if (!eval_term(t, z, v, g, h)) return -std::numeric_limits<double>::infinity();
    total += v;
  }
  return total;
}

/// Smallest constraint value at z, or -inf when a term is undefined.
inline double min_slack(const ConcaveProgram& p, const Eigen::VectorXd& z, std::string* label = nullptr) {
  double best = std::numeric_limits<double>::infinity(), v;
  Eigen::VectorXd g;
  Eigen::MatrixXd h;
  for (const auto& t : p.constraints) {
    if (!eval_term(t, z, v, g, h)) v = -std::numeric_limits<double>::infinity();
    if (v < best) {
      best = v;
      if (label) *label = t.label;
    }
  }
  return best;
}

inline bool objective_defined(const ConcaveProgram& p, const Eigen::VectorXd& z) {
  return std::isfinite(objective_value(p, z));
}

/// Newton direction for maximizing a concave φ: solve (−H + δI) Δ = ∇φ.
inline Eigen::VectorXd newton_direction(const Eigen::MatrixXd& hess, const Eigen::VectorXd& grad) {
  Eigen::MatrixXd m = -hess;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt.solve(grad);
  const double diag = std::max(m.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  for (double delta = 1e-12 * diag; delta < 1e12 * diag; delta *= 10.0) {
    Eigen::MatrixXd reg = m;
    reg.diagonal().array() += delta;
    llt.compute(reg);
    if (llt.info() == Eigen::Success) return llt.solve(grad);
  }
  throw NumericalError("barrier: Newton system could not be factorized");
}

/// Centring plus μ-continuation on a program whose start is strictly feasible.
/// `stop` may end the run early after any Newton step.
inline BarrierResult barrier_phase2(const ConcaveProgram& p, Eigen::VectorXd z, const BarrierOptions& opt,
                                    const std::function<bool(const Eigen::VectorXd&)>& stop = {}) {
  BarrierResult r;
  const double nc = std::max<double>(1.0, static_cast<double>(p.constraints.size()));
  double mu = p.constraints.empty() ? opt.mu_final : nc;
  BarrierEval cur, trial;
  for (;;) {
    ++r.stages;
    for (int it = 0; it < opt.max_newton_per_stage; ++it) {
      if (!barrier_eval(p, z, mu, cur, true)) throw NumericalError("barrier: iterate left the domain");
      const Eigen::VectorXd dir = newton_direction(cur.hess, cur.grad);
      const double lambda2 = cur.grad.dot(dir);
      r.decrement = lambda2;
      if (!(lambda2 > 2.0 * opt.newton_tol)) break;
      double step = 1.0;
      bool accepted = false;
      for (int h = 0; h <= opt.max_halvings; ++h) {
        const Eigen::VectorXd cand = z + step * dir;
        if (barrier_eval(p, cand, mu, trial, false) && trial.value >= cur.value + opt.armijo * step * lambda2) {
          z = cand;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      ++r.newton_steps;
      if (!accepted) {
        // Progress below floating-point resolution of φ counts as centred.
        if (lambda2 < 1e-6 * std::max(1.0, std::abs(cur.value))) break;
        r.line_search_failed = true;
        std::ostringstream os;
        os << "line search failed after " << opt.max_halvings << " halvings (mu=" << mu
           << ", decrement=" << lambda2 << ")";
        r.diagnostic = os.str();
        break;
      }
      if (stop && stop(z)) {
        r.z = z;
        r.mu = mu;
        r.objective = objective_value(p, z);
        return r;
      }
    }
    if (r.line_search_failed || mu <= opt.mu_final * (1.0 + 1e-12)) break;
    mu = std::max(mu / opt.mu_factor, opt.mu_final);
  }
  r.z = z;
  r.mu = mu;
  r.objective = objective_value(p, z);
  return r;
}

}  // namespace detail

/// Feasible-start log-barrier maximization with a phase-I repair for starts
/// that violate some constraint. Throws InfeasibleError when the repair fails.
inline BarrierResult concave_max(const ConcaveProgram& p, const Eigen::VectorXd& start,
                                 const BarrierOptions& opt = {}) {
  if (start.size() != p.dimension) throw ConfigError("concave_max: start has the wrong dimension");
  if (!detail::objective_defined(p, start)) throw InfeasibleError("concave_max: objective undefined at start");
  std::string worst;
  const double slack = detail::min_slack(p, start, &worst);
  if (slack > 0.0) return detail::barrier_phase2(p, start, opt);

  if (!std::isfinite(slack)) throw InfeasibleError("concave_max: constraint undefined at start (" + worst + ")");

  // Phase I: maximize s subject to g_i(z) >= s and s <= 1, over (z, s).
  ConcaveProgram ph;
  const int n = p.dimension;
  ph.dimension = n + 1;
  const double cap = std::max(1.0, 10.0 * opt.phase1_margin);
  ph.objective.push_back({{n}, [](const Eigen::VectorXd& x, double& v, Eigen::VectorXd& g, Eigen::MatrixXd&) {
                            v = x[0];
                            g[0] = 1.0;
                            return true;
                          }, "phase1"});
  // A weak pull toward the start keeps directions the slack ignores bounded.
  std::vector<int> all(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
  ph.objective.push_back({all, [start, w = opt.phase1_proximal](const Eigen::VectorXd& x, double& v,
                                                                Eigen::VectorXd& g, Eigen::MatrixXd& h) {
                            const Eigen::VectorXd d = x - start;
                            v = -0.5 * w * d.squaredNorm();
                            g = -w * d;
                            h.diagonal().setConstant(-w);
                            return true;
                          }, "phase1 proximal"});
  // The original objective only guards its domain here.
  for (const auto& t : p.objective) {
    LocalTerm guard = t;
    guard.eval = [e = t.eval](const Eigen::VectorXd& x, double& v, Eigen::VectorXd& g, Eigen::MatrixXd& h) {
      if (!e(x, v, g, h)) return false;
      v = 0.0;
      g.setZero();
      h.setZero();
      return true;
    };
    ph.objective.push_back(std::move(guard));
  }
  // Constraints already strict at the start stay hard, which keeps the
  // objective's domain intact; only the others are relaxed by s.
  for (const auto& t : p.constraints) {
    double v0;
    Eigen::VectorXd g0;
    Eigen::MatrixXd h0;
    if (detail::eval_term(t, start, v0, g0, h0) && v0 > 0.0) {
      ph.constraints.push_back(t);
      continue;
    }
    LocalTerm shifted = t;
    shifted.index.push_back(n);
    shifted.eval = [e = t.eval](const Eigen::VectorXd& x, double& v, Eigen::VectorXd& g, Eigen::MatrixXd& h) {
      const auto m = x.size() - 1;
      Eigen::VectorXd gl = Eigen::VectorXd::Zero(m);
      Eigen::MatrixXd hl = Eigen::MatrixXd::Zero(m, m);
      if (!e(x.head(m), v, gl, hl)) return false;
      v -= x[m];
      g.head(m) = gl;
      g[m] = -1.0;
      h.topLeftCorner(m, m) = hl;
      return true;
    };
    ph.constraints.push_back(std::move(shifted));
  }
  ph.constraints.push_back({{n}, [cap](const Eigen::VectorXd& x, double& v, Eigen::VectorXd& g, Eigen::MatrixXd&) {
                              v = cap - x[0];
                              g[0] = -1.0;
                              return true;
                            }, "phase1 cap"});

  Eigen::VectorXd z0(n + 1);
  z0.head(n) = start;
  z0[n] = slack - 1.0;
  const double margin = opt.phase1_margin;
  auto done = [n, margin](const Eigen::VectorXd& z) { return z[n] >= margin; };
  BarrierResult r1 = detail::barrier_phase2(ph, z0, opt, done);
  const Eigen::VectorXd z1 = r1.z.head(n);
  if (!(r1.z[n] > 0.0) || !(detail::min_slack(p, z1) > 0.0)) {
    std::ostringstream os;
    detail::min_slack(p, z1, &worst);
    os << "concave_max: no strictly feasible point found (best slack " << r1.z[n] << ", " << r1.newton_steps 
       << " Newton steps, " << (r1.diagnostic.empty() ? "centred" : r1.diagnostic) << ", tightest constraint: "
       << worst << ")";
    throw InfeasibleError(os.str());
  }
  BarrierResult r2 = detail::barrier_phase2(p, z1, opt);
  r2.newton_steps += r1.newton_steps;
  r2.stages += r1.stages;
  return r2;
}

}  // namespace skyrelay
