#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "skyrelay/error.hpp"
#include "skyrelay/rates.hpp"

namespace skyrelay {

enum class Certificate { convex, not_certified };

namespace detail {
inline bool rel_equal(double u, double v, double rel_tol) {
  const double scale = std::max(std::abs(u), std::abs(v));
  return std::abs(u - v) <= rel_tol * scale;
}
}  // namespace detail

/// Certifies convexity of 1/(ax + by + cxy + d) at a probe point when ab = cd
/// and the denominator is positive there.
inline Certificate lemma1_certificate(double a, double b, double c, double d, double x, double y,
                                      double rel_tol = 1e-12) {
  const double u = a * x + b * y + c * x * y + d;
  return detail::rel_equal(a * b, c * d, rel_tol) && u > 0.0 ? Certificate::convex : Certificate::not_certified;
}

/// Sufficient condition for convexity of 1/(ax + by + cxy + e) on x, y >= 0:
/// non-negative coefficients with c·e <= 4ab. Covers every exact SINR form.
inline Certificate sinr_convexity_certificate(double a, double b, double c, double e, double x, double y) {
  if (a < 0.0 || b < 0.0 || c < 0.0 || e < 0.0 || x < 0.0 || y < 0.0) return Certificate::not_certified;
  const double u = a * x + b * y + c * x * y + e;
  return u > 0.0 && c * e <= 4.0 * a * b ? Certificate::convex : Certificate::not_certified;
}

/// Which function the SCA minorizers are anchored to.
///
/// `convexified` linearizes the convexified SINR (extra constant in the denominator)
/// and the DC rate split. `tight` linearizes the exact SINR, which is itself
/// convex in ψ, and uses product/AM-GM minorizers that are exact at the
/// expansion point on the power side.
enum class BoundForm { convexified, tight };

inline const char* to_string(BoundForm f) { return f == BoundForm::convexified ? "convexified" : "tight"; }

// ---------------------------------------------------------------------------
// Trajectory side: SINR as a function of ψ_r = σ²/h_r and ψ_k = σ²/h_k.

/// γ(ψ_r, ψ_k) = num / (a ψ_r + b ψ_k + c ψ_r ψ_k + e).
struct SinrModel {
  double num = 0.0;
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double e = 0.0;

  double den(double psi_r, double psi_k) const { return a * psi_r + b * psi_k + c * psi_r * psi_k + e; }
  double value(double psi_r, double psi_k) const {
    if (num == 0.0) return 0.0;
    const double d = den(psi_r, psi_k);
    if (!(d > 0.0)) throw DomainError("sinr model: non-positive denominator");
    return num / d;
  }
};

namespace detail {

inline void check_vehicle(std::size_t k) {
  if (k >= kVehicles) throw DomainError("vehicle index out of range");
}

/// True when vehicle k decodes with the other vehicle's signal as interference.
inline bool is_weak(Mode m, std::size_t k) {
  return (m == Mode::sic_at_vehicle1 && k == 1) || (m == Mode::sic_at_vehicle2 && k == 0);
}

}  // namespace detail

/// Exact SINR of vehicle k in ψ form.
inline SinrModel exact_sinr_model(Mode m, std::size_t k, const SlotPowers& p) {
  detail::check_vehicle(k);
  detail::require_nonnegative(p);
  const double pk = p.vehicle(k);
  if (m == Mode::oma) return {p.pr * pk, 0.5 * p.pr, pk, 0.5, 0.0};
  const double interference = detail::is_weak(m, k) ? p.vehicle(1 - k) : 0.0;
  return {p.pr * pk, p.pr, p.bs_total(), 1.0, interference * p.pr};
}

/// SINR with the constant convexifying term: (p1+p2)p_r for NOMA, p_r p_k for OMA.
inline SinrModel convexified_sinr_model(Mode m, std::size_t k, const SlotPowers& p) {
  detail::check_vehicle(k);
  detail::require_nonnegative(p);
  const double pk = p.vehicle(k);
  if (m == Mode::oma) return {p.pr * pk, p.pr, pk, 1.0, p.pr * pk};
  return {p.pr * pk, p.pr, p.bs_total(), 1.0, p.bs_total() * p.pr};
}

inline SinrModel trajectory_target_model(Mode m, std::size_t k, const SlotPowers& p, BoundForm form) {
  return form == BoundForm::convexified ? convexified_sinr_model(m, k, p) : exact_sinr_model(m, k, p);
}

/// First-order expansion of a convex SINR in (ψ_r, ψ_k), giving a concave rate bound.
struct TrajectoryLB {
  Mode mode = Mode::oma;
  std::size_t vehicle = 0;
  BoundForm form = BoundForm::convexified;
  double prefactor = 0.5;
  double gamma = 0.0;  // SINR at the expansion point
  double scale = 0.0;  // 1 / denominator at the expansion point
  double d_r = 0.0;    // ∂γ/∂ψ_r
  double d_k = 0.0;    // ∂γ/∂ψ_k
  double psi_r = 0.0;
  double psi_k = 0.0;
  SinrModel target;

  /// Affine SINR bound at (ψ_r, ψ_k).
  double sinr(double psi_r_new, double psi_k_new) const {
    return gamma + d_r * (psi_r_new - psi_r) + d_k * (psi_k_new - psi_k);
  }
};

inline TrajectoryLB trajectory_lb_build(Mode m, std::size_t k, const SlotPowers& p, double psi_r, double psi_k,
                                        BoundForm form = BoundForm::convexified) {
  if (!(psi_r > 0.0) || !(psi_k > 0.0)) throw DomainError("trajectory_lb_build: psi must be positive");
  TrajectoryLB lb;
  lb.mode = m;
  lb.vehicle = k;
  lb.form = form;
  lb.prefactor = rate_prefactor(m);
  lb.psi_r = psi_r;
  lb.psi_k = psi_k;
  lb.target = trajectory_target_model(m, k, p, form);
  const SinrModel& s = lb.target;
  const bool certified =
      form == BoundForm::convexified
          ? (s.num == 0.0 || lemma1_certificate(s.a, s.b, s.c, s.e, psi_r, psi_k) == Certificate::convex)
          : sinr_convexity_certificate(s.a, s.b, s.c, s.e, psi_r, psi_k) == Certificate::convex;
  const double den = s.den(psi_r, psi_k);
  if (!(den > 0.0)) throw DomainError("trajectory_lb_build: zero denominator");
  if (!certified) throw NumericalError("trajectory_lb_build: SINR model is not certified convex");
  lb.scale = 1.0 / den;
  lb.gamma = s.num * lb.scale;
  lb.d_r = -lb.scale * lb.scale * s.num * (s.a + s.c * psi_k);
  lb.d_k = -lb.scale * lb.scale * s.num * (s.b + s.c * psi_r);
  return lb;
}

/// Concave lower bound c·log2(1 + γ_lb); throws DomainError when 1 + γ_lb <= 0.
inline double trajectory_lb_rate(const TrajectoryLB& lb, double psi_r, double psi_k) {
  const double g = lb.sinr(psi_r, psi_k);
  if (!(1.0 + g > 0.0)) throw DomainError("trajectory_lb_rate: bound outside its domain");
  return lb.prefactor * log2_1p(g);
}

/// The function the bound minorizes: c·log2(1 + γ_target(ψ)).
inline double trajectory_target_rate(const TrajectoryLB& lb, double psi_r, double psi_k) {
  return lb.prefactor * log2_1p(lb.target.value(psi_r, psi_k));
}

// ---------------------------------------------------------------------------
// Power side. Powers are ordered (p1, p2, p_r) in every 3-vector below.

/// Gains divided by the noise power of the band in use: σ² for NOMA, σ²/2 for OMA.
struct NormalizedGains {
  double relay = 0.0;
  std::array<double, kVehicles> vehicle{};
};

inline NormalizedGains normalized_gains(Mode m, const SlotGains& g, double noise) {
  if (!(noise > 0.0)) throw DomainError("normalized_gains: noise must be positive");
  const double n = m == Mode::oma ? noise / 2.0 : noise;
  return {g.relay / n, {g.vehicle[0] / n, g.vehicle[1] / n}};
}

using Vec3d = std::array<double, 3>;
using Mat3d = std::array<Vec3d, 3>;

inline Vec3d as_vec(const SlotPowers& p) { return {p.p1, p.p2, p.pr}; }
inline SlotPowers as_powers(const Vec3d& v) { return {v[0], v[1], v[2]}; }

/// c0 + c·p
struct Affine3 {
  double c0 = 0.0;
  Vec3d c{};
  double at(const Vec3d& p) const { return c0 + c[0] * p[0] + c[1] * p[1] + c[2] * p[2]; }
};

/// Value, gradient and Hessian of a scalar function of three powers.
struct Eval3 {
  double value = 0.0;
  Vec3d grad{};
  Mat3d hess{};
};

namespace detail {

/// Adds w·ln(a(p)); false when a(p) <= 0.
inline bool add_log(Eval3& out, double w, const Affine3& a, const Vec3d& p) {
  const double v = a.at(p);
  if (!(v > 0.0)) return false;
  out.value += w * std::log(v);
  for (int i = 0; i < 3; ++i) {
    out.grad[i] += w * a.c[i] / v;
    for (int j = 0; j < 3; ++j) out.hess[i][j] -= w * a.c[i] * a.c[j] / (v * v);
  }
  return true;
}

inline void add_linear(Eval3& out, double w, const Affine3& a, const Vec3d& p) {
  out.value += w * a.at(p);
  for (int i = 0; i < 3; ++i) out.grad[i] += w * a.c[i];
}

inline void scale(Eval3& e, double s) {
  e.value *= s;
  for (int i = 0; i < 3; ++i) {
    e.grad[i] *= s;
    for (int j = 0; j < 3; ++j) e.hess[i][j] *= s;
  }
}

/// Index of p_k in the (p1, p2, p_r) vector.
inline int pk_index(std::size_t k) { return static_cast<int>(k); }
inline constexpr int kPr = 2;

/// The two affine factors whose product is the concave-part argument.
inline std::array<Affine3, 2> concave_factors(Mode m, std::size_t k, const NormalizedGains& g) {
  const double gk = g.vehicle[k];
  const double gr = g.relay;
  Affine3 a, b;
  if (m == Mode::oma) {
    a.c0 = 2.0;
    a.c[kPr] = gk;
    b.c0 = 1.0;
    b.c[pk_index(k)] = gr;
  } else if (is_weak(m, k)) {
    a.c0 = 1.0;
    a.c[kPr] = gk;
    b.c0 = 1.0;
    b.c[0] = gr;
    b.c[1] = gr;
  } else {
    a.c0 = 1.0;
    a.c[kPr] = gk;
    b.c0 = 1.0;
    b.c[pk_index(k)] = gr;
  }
  return {a, b};
}

/// Argument of the subtracted log in the DC split at powers p.
inline double dc_subtracted_arg(Mode m, std::size_t k, const NormalizedGains& g, const SlotPowers& p) {
  const double gk = g.vehicle[k];
  const double gr = g.relay;
  if (m == Mode::oma) return p.pr * gk + 2.0 * p.vehicle(k) * gr + 2.0;
  if (is_weak(m, k)) {
    const double other = p.vehicle(1 - k);
    return p.pr * gk * gr * other + p.pr * gk + other * gr + 1.0;
  }
  return p.pr * gk + p.bs_total() * gr + 1.0;
}

}  // namespace detail

/// The DC split of one vehicle's rate: prefactor·(log2 concave − log2 subtracted).
struct DcParts {
  double concave = 0.0;
  double subtracted = 0.0;
  double prefactor = 1.0;
  double value() const { return prefactor * (concave - subtracted); }
};

/// DC split per mode. Modes 1-2 drop the other vehicle's p·g_r term from the
/// weak-side denominator and from the strong-side numerator; OMA is exact.
inline DcParts dc_rate_parts(Mode m, std::size_t k, const NormalizedGains& g, const SlotPowers& p) {
  detail::check_vehicle(k);
  detail::require_nonnegative(p);
  const auto f = detail::concave_factors(m, k, g);
  const Vec3d v = as_vec(p);
  const double a = f[0].at(v), b = f[1].at(v);
  const double s = detail::dc_subtracted_arg(m, k, g, p);
  if (!(a > 0.0) || !(b > 0.0) || !(s > 0.0)) throw DomainError("dc_rate_parts: non-positive log argument");
  return {std::log2(a) + std::log2(b), std::log2(s), rate_prefactor(m)};
}

/// Exact rate written with normalized gains; equals slot_rates(...).rate[k].
inline double normalized_exact_rate(Mode m, std::size_t k, const NormalizedGains& g, const SlotPowers& p) {
  detail::check_vehicle(k);
  detail::require_nonnegative(p);
  const double gk = g.vehicle[k], gr = g.relay, pk = p.vehicle(k);
  double sinr;
  if (m == Mode::oma) {
    sinr = p.pr * gk * gr * pk / (p.pr * gk + 2.0 * pk * gr + 2.0);
  } else {
    const double interference = detail::is_weak(m, k) ? p.vehicle(1 - k) : 0.0;
    sinr = p.pr * gk * gr * pk / (p.pr * gk * gr * interference + p.pr * gk + p.bs_total() * gr + 1.0);
  }
  return rate_prefactor(m) * log2_1p(sinr);
}

/// log2(axy + bxz + cx + dy + ez + f) splits into two concave logs when a/d = b/e = c/f.
inline bool splits_trilinear_log(double a, double b, double c, double d, double e, double f, double rel_tol = 1e-12) {
  return detail::rel_equal(a * e, b * d, rel_tol) && detail::rel_equal(b * f, c * e, rel_tol) &&
         detail::rel_equal(a * f, c * d, rel_tol);
}

/// log2(axy + bx + cy + d) splits into two concave logs when a/c = b/d.
inline bool splits_bilinear_log(double a, double b, double c, double d, double rel_tol = 1e-12) {
  return detail::rel_equal(a * d, b * c, rel_tol);
}

/// Concave minorizer of one vehicle's rate around an expansion point in power space.
struct PowerLB {
  Mode mode = Mode::oma;
  std::size_t vehicle = 0;
  BoundForm form = BoundForm::convexified;
  double prefactor = 1.0;
  NormalizedGains gains;
  SlotPowers anchor;
  /// ln2 times the subtracted log argument at the anchor (F, G or J).
  double normalizer = 0.0;
  /// Gradient of log2(subtracted argument) at the anchor w.r.t. p1, p2, p_r.
  double d = 0.0;
  double t = 0.0;
  double c = 0.0;
  /// log2(subtracted argument) at the anchor.
  double subtracted0 = 0.0;
  /// Jensen weight for the interference-free NOMA vehicle (tight form).
  double lambda = 1.0;
  /// AM-GM balance for the bilinear denominator term of the weak NOMA vehicle (tight form).
  double eta = 1.0;
};

inline PowerLB power_lb_build(Mode m, std::size_t k, const NormalizedGains& g, const SlotPowers& anchor,
                              BoundForm form = BoundForm::convexified) {
  detail::check_vehicle(k);
  detail::require_nonnegative(anchor);
  if (!(g.relay >= 0.0) || !(g.vehicle[0] >= 0.0) || !(g.vehicle[1] >= 0.0))
    throw DomainError("power_lb_build: gains must be non-negative");
  PowerLB lb;
  lb.mode = m;
  lb.vehicle = k;
  lb.form = form;
  lb.prefactor = rate_prefactor(m);
  lb.gains = g;
  lb.anchor = anchor;

  const double gk = g.vehicle[k], gr = g.relay;
  const bool weak = m != Mode::oma && detail::is_weak(m, k);

  const bool split_ok = weak ? splits_trilinear_log(gk * gr, gk * gr, gk, gr, gr, 1.0)
                             : (m == Mode::oma ? splits_bilinear_log(gk * gr, gk, 2.0 * gr, 2.0)
                                               : splits_bilinear_log(gk * gr, gk, gr, 1.0));
  if (!split_ok) throw NumericalError("power_lb_build: concave part does not factor");

  const double ln2 = std::numbers::ln2;
  const std::size_t other = 1 - k;
  double s0;
  std::array<double, 3> ds{};  // ∂S/∂(p1, p2, p_r)
  if (m == Mode::oma) {
    s0 = anchor.pr * gk + 2.0 * anchor.vehicle(k) * gr + 2.0;
    ds[detail::pk_index(k)] = 2.0 * gr;
    ds[detail::kPr] = gk;
  } else if (!weak) {
    s0 = anchor.pr * gk + anchor.bs_total() * gr + 1.0;
    ds = {gr, gr, gk};
  } else if (form == BoundForm::convexified) {
    const double po = anchor.vehicle(other);
    s0 = anchor.pr * gk * gr * po + anchor.pr * gk + po * gr + 1.0;
    ds[detail::pk_index(other)] = anchor.pr * gk * gr + gr;
    ds[detail::kPr] = po * gk * gr + gk;
  } else {
    const double po = anchor.vehicle(other);
    s0 = anchor.pr * gk * gr * po + anchor.pr * gk + anchor.bs_total() * gr + 1.0;
    ds = {gr, gr, po * gk * gr + gk};
    ds[detail::pk_index(other)] += anchor.pr * gk * gr;
    // Balance η = Y/X of the bilinear term X·Y with X = p_r, Y = g_k g_r p_other.
    constexpr double floor = 1e-12;
    lb.eta = std::max(gk * gr * po, floor) / std::max(anchor.pr, floor);
  }
  if (!(s0 > 0.0)) throw DomainError("power_lb_build: non-positive log argument");
  lb.normalizer = ln2 * s0;
  lb.subtracted0 = std::log2(s0);
  lb.d = ds[0] / lb.normalizer;
  lb.t = ds[1] / lb.normalizer;
  lb.c = ds[2] / lb.normalizer;

  if (form == BoundForm::tight && m != Mode::oma && !weak) {
    const auto f = detail::concave_factors(m, k, g);
    const Vec3d v = as_vec(anchor);
    const double ab = f[0].at(v) * f[1].at(v);
    const double cc = anchor.vehicle(other) * gr;
    lb.lambda = ab / (ab + cc);
  }
  return lb;
}

/// Evaluates the bound with derivatives at p = (p1, p2, p_r); false outside its domain.
inline bool power_lb_eval(const PowerLB& lb, const Vec3d& p, Eval3& out) {
  out = Eval3{};
  const std::size_t k = lb.vehicle;
  const Mode m = lb.mode;
  const bool weak = m != Mode::oma && detail::is_weak(m, k);
  const auto f = detail::concave_factors(m, k, lb.gains);
  const double ln2 = std::numbers::ln2;

  // Concave part, natural log units.
  if (lb.form == BoundForm::tight && m != Mode::oma && !weak && lb.lambda < 1.0) {
    const double lam = lb.lambda;
    Affine3 cterm;
    cterm.c[detail::pk_index(1 - k)] = lb.gains.relay;
    if (!detail::add_log(out, lam, f[0], p) || !detail::add_log(out, lam, f[1], p)) return false;
    if (!detail::add_log(out, 1.0 - lam, cterm, p)) return false;
    out.value -= lam * std::log(lam) + (1.0 - lam) * std::log(1.0 - lam);
  } else {
    if (!detail::add_log(out, 1.0, f[0], p) || !detail::add_log(out, 1.0, f[1], p)) return false;
  }

  // Convex upper bound of the subtracted log, natural log units.
  const Vec3d p0 = as_vec(lb.anchor);
  const Vec3d dp{p[0] - p0[0], p[1] - p0[1], p[2] - p0[2]};
  if (lb.form == BoundForm::tight && weak) {
    // ln S <= ln S0 + (Q - S0)/S0 with S <= Q = ½(η X² + Y²/η) + rest.
    const std::size_t other = 1 - k;
    const double gk = lb.gains.vehicle[k], gr = lb.gains.relay;
    const double y1 = gk * gr;
    const double s0 = lb.normalizer / ln2;
    const int io = detail::pk_index(other);
    const double x = p[detail::kPr], y = y1 * p[io];
    const double q = 0.5 * (lb.eta * x * x + y * y / lb.eta) + x * gk + (p[0] + p[1]) * gr + 1.0;
    out.value -= std::log(s0) + (q - s0) / s0;
    out.grad[detail::kPr] -= (lb.eta * x + gk) / s0;
    out.grad[0] -= gr / s0;
    out.grad[1] -= gr / s0;
    out.grad[io] -= y1 * y / lb.eta / s0;
    out.hess[detail::kPr][detail::kPr] -= lb.eta / s0;
    out.hess[io][io] -= y1 * y1 / lb.eta / s0;
  } else {
    const Vec3d coef{lb.d * ln2, lb.t * ln2, lb.c * ln2};
    out.value -= lb.subtracted0 * ln2 + coef[0] * dp[0] + coef[1] * dp[1] + coef[2] * dp[2];
    for (int i = 0; i < 3; ++i) out.grad[i] -= coef[i];
  }
  detail::scale(out, lb.prefactor / ln2);
  return true;
}

/// Bound value at trial powers; throws DomainError outside its domain.
inline double power_lb_rate(const PowerLB& lb, const SlotPowers& p) {
  Eval3 e;
  if (!power_lb_eval(lb, as_vec(p), e)) throw DomainError("power_lb_rate: bound outside its domain");
  return e.value;
}

/// What the bound minorizes: the DC rate for the convexified form, the exact rate for the tight form.
inline double power_target_rate(const PowerLB& lb, const SlotPowers& p) {
  if (lb.form == BoundForm::convexified) return dc_rate_parts(lb.mode, lb.vehicle, lb.gains, p).value();
  return normalized_exact_rate(lb.mode, lb.vehicle, lb.gains, p);
}

}  // namespace skyrelay
