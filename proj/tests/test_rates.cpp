#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "skyrelay/rates.hpp"

using namespace skyrelay;

namespace {

// Relay-gain form of the AF rates, evaluated in long double.
long double af_rate(long double rho, long double hk, long double hr, long double own, long double interf,
                    long double noise) {
  const long double sinr = rho * hk * hr * own / (rho * hk * hr * interf + rho * hk * noise + noise);
  return std::log2(1.0L + sinr);
}

struct Slot {
  SlotGains g;
  double noise;
};

Slot default_slot1() {
  const Scenario s = Scenario::default_deployment();
  const ChannelState c = channel_state(initial_trajectory(s.with_slots(1)), s.with_slots(1));
  return {{c.relay[0], {c.vehicle[0][0], c.vehicle[1][0]}}, s.noise_power};
}

}  // namespace

TEST(AmplificationGain, Basics) {
  EXPECT_EQ(amplification_gain_noma({0.2, 0.3, 0.0}, 1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(amplification_gain_noma({0.0, 0.0, 1.0}, 5.0, 1.0), 1.0);
  EXPECT_THROW(amplification_gain_noma({0.0, 0.0, 1.0}, 5.0, 0.0), DomainError);
  const Slot s = default_slot1();
  const SlotPowers p{0.25, 0.25, 0.5};
  EXPECT_DOUBLE_EQ(amplification_gain_noma(p, s.g.relay, s.noise), 0.5 / (0.5 * s.g.relay + s.noise));
}

TEST(RateMode1, ZeroPowerCases) {
  const double hr = 3e-8, h1 = 2e-8, h2 = 1e-8, n = 4e-14;
  auto r = rate_mode1(hr, h1, h2, {0.3, 0.0, 0.5}, n);
  EXPECT_EQ(r[1], 0.0);
  const double single = std::log2(1 + 0.5 * h1 * hr * 0.3 / (0.5 * h1 * n + 0.3 * hr * n + n * n));
  EXPECT_NEAR(r[0], single, 1e-13 * single);
  r = rate_mode1(hr, h1, h2, {0.3, 0.2, 0.0}, n);
  EXPECT_EQ(r[0], 0.0);
  EXPECT_EQ(r[1], 0.0);
  EXPECT_THROW(rate_mode1(hr, h1, h2, {-0.1, 0.2, 0.5}, n), DomainError);
}

TEST(RateMode1, MatchesRelayGainForm) {
  const Slot s = default_slot1();
  const SlotPowers p{0.25, 0.25, 0.5};
  const auto r = rate_mode1(s.g.relay, s.g.vehicle[0], s.g.vehicle[1], p, s.noise);
  const long double rho = 0.5L / (0.5L * s.g.relay + s.noise);
  const long double r1 = af_rate(rho, s.g.vehicle[0], s.g.relay, 0.25L, 0.0L, s.noise);
  const long double r2 = af_rate(rho, s.g.vehicle[1], s.g.relay, 0.25L, 0.25L, s.noise);
  EXPECT_NEAR(r[0], static_cast<double>(r1), 1e-12);
  EXPECT_NEAR(r[1], static_cast<double>(r2), 1e-12);
}

TEST(RateMode2, MirrorOfMode1) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (int i = 0; i < 200; ++i) {
    const double hr = u(rng) * 1e-9, ha = u(rng) * 1e-9, hb = u(rng) * 1e-9, n = 4e-14;
    const SlotPowers p{u(rng) / 10, u(rng) / 10, u(rng) / 10};
    const auto m2 = rate_mode2(hr, ha, hb, p, n);
    const auto m1 = rate_mode1(hr, hb, ha, {p.p2, p.p1, p.pr}, n);
    EXPECT_DOUBLE_EQ(m2[0], m1[1]);
    EXPECT_DOUBLE_EQ(m2[1], m1[0]);
  }
  EXPECT_EQ(rate_mode2(1e-8, 1e-8, 1e-8, {0.0, 0.3, 0.4}, 1e-13)[0], 0.0);
}

TEST(RateMode2, MatchesRelayGainForm) {
  const Slot s = default_slot1();
  const SlotPowers p{0.35, 0.15, 0.5};
  const auto r = rate_mode2(s.g.relay, s.g.vehicle[0], s.g.vehicle[1], p, s.noise);
  const long double rho = 0.5L / (0.5L * s.g.relay + s.noise);
  EXPECT_NEAR(r[0], static_cast<double>(af_rate(rho, s.g.vehicle[0], s.g.relay, 0.35L, 0.15L, s.noise)), 1e-12);
  EXPECT_NEAR(r[1], static_cast<double>(af_rate(rho, s.g.vehicle[1], s.g.relay, 0.15L, 0.0L, s.noise)), 1e-12);
}

TEST(RateMode3, ZeroPowerAndRelayLimitedAsymptote) {
  EXPECT_EQ(rate_mode3(1e-8, 1e-8, 0.0, 0.5, 2e-14), 0.0);
  const double hr = 2e-8, pk = 0.3, no = 2e-14;
  const double limit = 0.5 * std::log2(1 + hr * pk / no);
  EXPECT_NEAR(rate_mode3(hr, 1e3, pk, 0.5, no), limit, 1e-6);
}

TEST(RateMode3, MatchesRelayGainForm) {
  const Slot s = default_slot1();
  const double no = s.noise / 2;
  for (std::size_t k = 0; k < 2; ++k) {
    const long double rho = 0.5L * 0.5L / (0.25L * s.g.relay + no);
    const long double sinr = rho * s.g.vehicle[k] * s.g.relay * 0.25L / (rho * s.g.vehicle[k] * no + no);
    EXPECT_NEAR(rate_mode3(s.g.relay, s.g.vehicle[k], 0.25, 0.5, no), static_cast<double>(0.5L * std::log2(1 + sinr)),
                1e-12);
  }
}

TEST(SlotRates, Dispatch) {
  const Slot s = default_slot1();
  const SlotPowers p{0.2, 0.3, 0.5};
  const SlotRates a = slot_rates(Mode::sic_at_vehicle1, s.g, p, s.noise);
  const auto ref = rate_mode1(s.g.relay, s.g.vehicle[0], s.g.vehicle[1], p, s.noise);
  EXPECT_EQ(a.rate[0], ref[0]);
  EXPECT_EQ(a.rate[1], ref[1]);
  EXPECT_EQ(a.amp_gain[0], amplification_gain_noma(p, s.g.relay, s.noise));
  const SlotRates o = slot_rates(Mode::oma, s.g, p, s.noise);
  EXPECT_EQ(o.rate[1], rate_mode3(s.g.relay, s.g.vehicle[1], 0.3, 0.5, s.noise / 2));
  EXPECT_THROW(slot_rates(static_cast<Mode>(4), s.g, p, s.noise), DomainError);
  EXPECT_THROW(mode_from_int(0), DomainError);
}

TEST(SlotRates, OmaEqualPowersFollowGainOrder) {
  const SlotGains g{2e-8, {3e-8, 1e-8}};
  const SlotRates r = slot_rates(Mode::oma, g, {0.25, 0.25, 0.5}, 4e-14);
  EXPECT_GT(r.rate[0], r.rate[1]);
}

TEST(SlotRates, EqualLinksGiveSameSumInBothNomaModes) {
  const SlotGains g{2e-8, {1e-8, 1e-8}};
  const SlotPowers p{0.2, 0.3, 0.5};
  const double s1 = slot_rates(Mode::sic_at_vehicle1, g, p, 4e-14).sum();
  const double s2 = slot_rates(Mode::sic_at_vehicle2, g, p, 4e-14).sum();
  EXPECT_NEAR(s1, s2, 1e-12 * s1);
}

TEST(SlotRates, ZeroPowersGiveZeroRates) {
  const SlotGains g{2e-8, {1e-8, 3e-8}};
  for (Mode m : {Mode::sic_at_vehicle1, Mode::sic_at_vehicle2, Mode::oma}) {
    const SlotRates r = slot_rates(m, g, {0, 0, 0}, 4e-14);
    EXPECT_EQ(r.rate[0], 0.0);
    EXPECT_EQ(r.rate[1], 0.0);
  }
}

TEST(RateProperties, MonotoneInOwnPowerAndRelayPower) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int i = 0; i < 300; ++i) {
    const SlotGains g{u(rng) * 1e-8, {u(rng) * 1e-8, u(rng) * 1e-8}};
    const SlotPowers p{u(rng), u(rng), u(rng)};
    for (Mode m : {Mode::sic_at_vehicle1, Mode::sic_at_vehicle2, Mode::oma}) {
      const SlotRates base = slot_rates(m, g, p, 4e-14);
      const SlotRates more_r = slot_rates(m, g, {p.p1, p.p2, p.pr * 1.1}, 4e-14);
      const SlotRates more_1 = slot_rates(m, g, {p.p1 * 1.1, p.p2, p.pr}, 4e-14);
      const SlotRates more_2 = slot_rates(m, g, {p.p1, p.p2 * 1.1, p.pr}, 4e-14);
      EXPECT_GE(more_r.rate[0], base.rate[0]);
      EXPECT_GE(more_r.rate[1], base.rate[1]);
      EXPECT_GE(more_1.rate[0], base.rate[0]);
      EXPECT_GE(more_2.rate[1], base.rate[1]);
    }
  }
}

TEST(RateProperties, StrongVehicleDecodesWeakMessage) {
  // With h1 > h2, vehicle 1 can decode vehicle 2's message at least as well as vehicle 2.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int i = 0; i < 500; ++i) {
    double h1 = u(rng) * 1e-8, h2 = u(rng) * 1e-8;
    if (h1 < h2) std::swap(h1, h2);
    const double hr = u(rng) * 1e-8, n = 4e-14;
    const SlotPowers p{u(rng), u(rng), u(rng)};
    const double rho = amplification_gain_noma(p, hr, n);
    const double r12 = std::log2(1 + rho * h1 * hr * p.p2 / (rho * h1 * hr * p.p1 + rho * h1 * n + n));
    const double r22 = rate_mode1(hr, h1, h2, p, n)[1];
    EXPECT_GE(r12, r22 - 1e-12);
  }
}

TEST(RateProperties, NoInterferenceMeansSicIsIrrelevant) {
  const double hr = 2e-8, h1 = 1e-8, h2 = 3e-8, n = 4e-14;
  const SlotPowers p{0.0, 0.4, 0.5};
  EXPECT_DOUBLE_EQ(rate_mode1(hr, h1, h2, p, n)[1], rate_mode2(hr, h1, h2, p, n)[1]);
}

TEST(HighSnr, ClosedForms) {
  const HighSnrGains g{1e6, 1e5, 1e3};
  EXPECT_NEAR(high_snr_rate(Scheme::noma, Objective::sum, g), std::log2(1e11 / 1.1e6), 1e-12);
  EXPECT_NEAR(high_snr_rate(Scheme::noma, Objective::sum, g), 16.47, 0.01);
  const double oma = 0.5 * std::log2(1e11 / 1.1e6) + 0.5 * std::log2(1e9 / (1e6 + 1e3));
  EXPECT_NEAR(high_snr_rate(Scheme::oma, Objective::sum, g), oma, 1e-12);
  EXPECT_NEAR(high_snr_rate(Scheme::oma, Objective::min, g), 0.5 * std::log2(1e9 / (1e6 + 1e3)), 1e-12);
  EXPECT_NEAR(high_snr_rate(Scheme::noma, Objective::min, g, 0.1, 0.9), std::log2(9.0), 1e-12);
  EXPECT_THROW(high_snr_rate(Scheme::noma, Objective::min, g, 0.6, 0.4), DomainError);
  EXPECT_THROW(high_snr_rate(Scheme::noma, Objective::min, g, 0.5, 0.5), DomainError);
}

TEST(HighSnr, CaseThreeSumsCoincideWhenRelayIsWeakest) {
  // h1 > h2 >> h_r: both schemes are limited by the relay link.
  const HighSnrGains g{1e3, 1e9, 1e8};
  EXPECT_NEAR(high_snr_rate(Scheme::noma, Objective::sum, g), high_snr_rate(Scheme::oma, Objective::sum, g), 1e-3);
}
