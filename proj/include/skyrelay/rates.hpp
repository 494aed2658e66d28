#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "skyrelay/error.hpp"
#include "skyrelay/scenario.hpp"

namespace skyrelay {

/// BS powers for each vehicle and the relay power in one slot (watts).
struct SlotPowers {
  double p1 = 0.0;
  double p2 = 0.0;
  double pr = 0.0;

  double bs_total() const { return p1 + p2; }
  double vehicle(std::size_t k) const { return k == 0 ? p1 : p2; }
  friend bool operator==(const SlotPowers&, const SlotPowers&) = default;
};

/// Operating mode of one slot: NOMA with SIC at vehicle 1, at vehicle 2, or FDMA.
enum class Mode : int { sic_at_vehicle1 = 1, sic_at_vehicle2 = 2, oma = 3 };

inline int to_int(Mode m) { return static_cast<int>(m); }

inline Mode mode_from_int(int m) {
  if (m < 1 || m > 3) throw DomainError("mode must be 1, 2 or 3");
  return static_cast<Mode>(m);
}

/// Rate prefactor: a full band for NOMA, half a band for OMA.
inline double rate_prefactor(Mode m) { return m == Mode::oma ? 0.5 : 1.0; }

/// Channel gains seen in one slot.
struct SlotGains {
  double relay = 0.0;
  std::array<double, kVehicles> vehicle{};
};

struct SlotRates {
  Mode mode = Mode::oma;
  std::array<double, kVehicles> rate{};      // bps/Hz
  std::array<double, kVehicles> sinr{};
  std::array<double, kVehicles> amp_gain{};  // equal entries for NOMA
  double sum() const { return rate[0] + rate[1]; }
  double min() const { return std::min(rate[0], rate[1]); }
};

/// log2(1 + x), accurate for small x.
inline double log2_1p(double x) { return std::log1p(x) / std::numbers::ln2; }

namespace detail {

inline void require_nonnegative(const SlotPowers& p) {
  if (!(p.p1 >= 0.0) || !(p.p2 >= 0.0) || !(p.pr >= 0.0)) throw DomainError("powers must be non-negative");
}

/// SINR of a NOMA vehicle: `own` is its BS power, `interference` the power left undecoded.
inline double noma_sinr(double h_r, double h_k, double own, double interference, const SlotPowers& p,
                        double noise) {
  const double num = p.pr * h_k * h_r * own;
  if (num == 0.0) return 0.0;
  const double den = p.pr * h_k * h_r * interference + p.pr * h_k * noise + p.bs_total() * h_r * noise +
                     noise * noise;
  return num / den;
}

}  // namespace detail

/// Relay amplification gain ρ = p_r / ((p1 + p2) h_r + σ²).
inline double amplification_gain_noma(const SlotPowers& p, double h_r, double noise) {
  detail::require_nonnegative(p);
  const double den = p.bs_total() * h_r + noise;
  if (!(den > 0.0)) throw DomainError("amplification_gain_noma: zero denominator");
  return p.pr / den;
}

/// Per-half-band amplification gain ρ_k = p_r/2 / (p_k h_r + σ_O²).
inline double amplification_gain_oma(double p_k, double p_r, double h_r, double oma_noise) {
  const double den = p_k * h_r + oma_noise;
  if (!(den > 0.0)) throw DomainError("amplification_gain_oma: zero denominator");
  return 0.5 * p_r / den;
}

/// SINRs with SIC at vehicle 1: vehicle 1 decodes interference-free, vehicle 2 sees p1.
inline std::array<double, 2> sinr_mode1(double h_r, double h_1, double h_2, const SlotPowers& p, double noise) {
  detail::require_nonnegative(p);
  return {detail::noma_sinr(h_r, h_1, p.p1, 0.0, p, noise), detail::noma_sinr(h_r, h_2, p.p2, p.p1, p, noise)};
}

/// SINRs with SIC at vehicle 2.
inline std::array<double, 2> sinr_mode2(double h_r, double h_1, double h_2, const SlotPowers& p, double noise) {
  detail::require_nonnegative(p);
  return {detail::noma_sinr(h_r, h_1, p.p1, p.p2, p, noise), detail::noma_sinr(h_r, h_2, p.p2, 0.0, p, noise)};
}

/// SINR of one vehicle on its OMA half-band.
inline double sinr_mode3(double h_r, double h_k, double p_k, double p_r, double oma_noise) {
  if (!(p_k >= 0.0) || !(p_r >= 0.0)) throw DomainError("powers must be non-negative");
  const double num = p_r * h_k * h_r * p_k;
  if (num == 0.0) return 0.0;
  return num / (p_r * h_k * oma_noise + 2.0 * p_k * h_r * oma_noise + 2.0 * oma_noise * oma_noise);
}

inline std::array<double, 2> rate_mode1(double h_r, double h_1, double h_2, const SlotPowers& p, double noise) {
  const auto g = sinr_mode1(h_r, h_1, h_2, p, noise);
  return {log2_1p(g[0]), log2_1p(g[1])};
}

inline std::array<double, 2> rate_mode2(double h_r, double h_1, double h_2, const SlotPowers& p, double noise) {
  const auto g = sinr_mode2(h_r, h_1, h_2, p, noise);
  return {log2_1p(g[0]), log2_1p(g[1])};
}

inline double rate_mode3(double h_r, double h_k, double p_k, double p_r, double oma_noise) {
  return 0.5 * log2_1p(sinr_mode3(h_r, h_k, p_k, p_r, oma_noise));
}

/// Exact rates of both vehicles in the given mode. `noise` is σ²; OMA uses σ²/2.
inline SlotRates slot_rates(Mode mode, const SlotGains& g, const SlotPowers& p, double noise) {
  SlotRates r;
  r.mode = mode;
  switch (mode) {
    case Mode::sic_at_vehicle1:
      r.sinr = sinr_mode1(g.relay, g.vehicle[0], g.vehicle[1], p, noise);
      r.amp_gain.fill(amplification_gain_noma(p, g.relay, noise));
      break;
    case Mode::sic_at_vehicle2:
      r.sinr = sinr_mode2(g.relay, g.vehicle[0], g.vehicle[1], p, noise);
      r.amp_gain.fill(amplification_gain_noma(p, g.relay, noise));
      break;
    case Mode::oma: {
      const double oma_noise = noise / 2.0;
      for (std::size_t k = 0; k < kVehicles; ++k) {
        r.sinr[k] = sinr_mode3(g.relay, g.vehicle[k], p.vehicle(k), p.pr, oma_noise);
        r.amp_gain[k] = amplification_gain_oma(p.vehicle(k), p.pr, g.relay, oma_noise);
      }
      break;
    }
    default:
      throw DomainError("slot_rates: invalid mode");
  }
  const double c = rate_prefactor(mode);
  for (std::size_t k = 0; k < kVehicles; ++k) r.rate[k] = c * log2_1p(r.sinr[k]);
  return r;
}

enum class Scheme { noma, oma };
enum class Objective { sum, min };

/// Gains with the transmit SNR folded in (h∞ = P h / σ²).
struct HighSnrGains {
  double relay = 0.0;
  double vehicle1 = 0.0;
  double vehicle2 = 0.0;
};

/// Closed-form high-SNR approximations of the sum and min rates.
///
/// NOMA assumes SIC at the stronger vehicle; the min form is log2(p_weak/p_strong)
/// and needs p_weak > p_strong. OMA uses the equal split. Powers are
/// normalised so that p1 + p2 = 1 and p_r = 1.
inline double high_snr_rate(Scheme scheme, Objective objective, const HighSnrGains& g, double p1 = 0.5,
                            double p2 = 0.5) {
  if (!(g.relay > 0.0) || !(g.vehicle1 > 0.0) || !(g.vehicle2 > 0.0))
    throw DomainError("high_snr_rate: gains must be positive");
  auto harmonic = [](double a, double b) { return a * b / (a + b); };
  const bool first_strong = g.vehicle1 >= g.vehicle2;
  const double strong = first_strong ? g.vehicle1 : g.vehicle2;
  const double weak = first_strong ? g.vehicle2 : g.vehicle1;
  if (scheme == Scheme::noma) {
    if (objective == Objective::sum) return std::log2(harmonic(strong, g.relay));
    const double p_strong = first_strong ? p1 : p2;
    const double p_weak = first_strong ? p2 : p1;
    if (!(p_strong > 0.0) || !(p_weak > p_strong))
      throw DomainError("high_snr_rate: NOMA min-rate needs the weak vehicle to get more power");
    return std::log2(p_weak / p_strong);
  }
  if (objective == Objective::sum)
    return 0.5 * std::log2(harmonic(g.vehicle1, g.relay)) + 0.5 * std::log2(harmonic(g.vehicle2, g.relay));
  return 0.5 * std::log2(harmonic(weak, g.relay));
}

}  // namespace skyrelay
