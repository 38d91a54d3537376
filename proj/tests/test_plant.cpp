#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <doctest.h>

#include "statorguard/a64s.hpp"
#include "statorguard/plant.hpp"
#include "statorguard/signal.hpp"
#include "oracles.hpp"

using namespace statorguard;
using namespace statorguard::plant;
using statorguard::testing::mna_oracle;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double rel_err(const ThirdHarmonicPhasors& a, const ThirdHarmonicPhasors& b) {
  const double scale = std::max({std::abs(b.V_N3), std::abs(b.V_P3), 1e-300});
  return std::max(std::abs(a.V_N3 - b.V_N3), std::abs(a.V_P3 - b.V_P3)) / scale;
}

}  // namespace

TEST_CASE("grounding resistor sizing") {
  CHECK(grounding_resistor_sizing(2.0, 60.0, 7.5e-6) == doctest::Approx(88.0).epsilon(0.01));
  CHECK(grounding_resistor_sizing(2.0, 60.0, 7.5e-6) == doctest::Approx(88.42).epsilon(1e-3));
  CHECK(grounding_resistor_sizing(1.0, 60.0, 1.0 / (kTwoPi * 60.0)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(grounding_resistor_sizing(4.0, 60.0, 7.5e-6) ==
        doctest::Approx(grounding_resistor_sizing(2.0, 60.0, 7.5e-6) / 4.0).epsilon(1e-12));
  CHECK_THROWS_AS(grounding_resistor_sizing(0.0, 60.0, 1e-6), Error);
}

TEST_CASE("e3 operating-point model") {
  MachineConfig cfg;
  CHECK(e3_of_operating_point(cfg, 1.0, 1.0) == doctest::Approx(cfg.E3));
  CHECK(e3_of_operating_point(cfg, 0.0, 1.0) == doctest::Approx(0.4 * cfg.E3));
  cfg.e3_coeffs = {1.0, 0.0, 0.0};
  CHECK(e3_of_operating_point(cfg, 0.0, 0.9) == doctest::Approx(cfg.E3));
  CHECK(e3_of_operating_point(cfg, 1.2, -0.8) == doctest::Approx(cfg.E3));
  CHECK_THROWS_AS(e3_of_operating_point(cfg, 1.5, 1.0), Error);
  CHECK_THROWS_AS(e3_of_operating_point(cfg, 1.0, 0.5), Error);
}

TEST_CASE("e3 model is non-decreasing in load") {
  MachineConfig cfg;
  double prev = 0.0;
  for (double load = 0.0; load <= 1.2; load += 0.05) {
    const double e = e3_of_operating_point(cfg, load, 0.9);
    CHECK(e >= prev);
    prev = e;
  }
}

TEST_CASE("ladder: metallic faults at the ends") {
  MachineConfig cfg;
  const OperatingPoint op{1.0, 1.0, 1.0};
  const auto neutral = third_harmonic_solve(cfg, FaultSpec{0.0, 0.0, 0.0}, op);
  CHECK(neutral.V_N3 == cplx{0.0, 0.0});
  CHECK(std::abs(neutral.V_P3) == doctest::Approx(cfg.E3).epsilon(0.05));
  const auto terminal = third_harmonic_solve(cfg, FaultSpec{1.0, 0.0, 0.0}, op);
  CHECK(terminal.V_P3 == cplx{0.0, 0.0});
  CHECK(std::abs(terminal.V_N3) == doctest::Approx(cfg.E3).epsilon(0.05));
}

TEST_CASE("ladder agrees with a dense nodal solve over 200 random configurations") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> segments(4, 96);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    MachineConfig cfg;
    cfg.M = segments(rng);
    cfg.E3 = 1.0 + 20.0 * u(rng);
    cfg.Cs = 1e-6 + 20e-6 * u(rng);
    cfg.Ct = trial % 5 == 0 ? 0.0 : 2e-6 * u(rng);
    cfg.N = 1.0 + 4.0 * u(rng);
    cfg.Rn = 10.0 + 990.0 * u(rng);
    cfg.tilt_pf = 0.6 * u(rng);
    cfg.tilt_load = 0.2 * u(rng) - 0.1;
    const OperatingPoint op{1.2 * u(rng), (u(rng) < 0.5 ? -1.0 : 1.0) * (0.8 + 0.2 * u(rng)), 0.2 + u(rng)};
    std::optional<FaultSpec> fault;
    if (trial % 4 != 0) {
      const double rf = trial % 7 == 0 ? 0.0 : 10000.0 * u(rng);
      fault = FaultSpec{u(rng), rf, 0.0};
    }
    const auto got = third_harmonic_solve(cfg, fault, op);
    const auto want = mna_oracle(cfg, fault, op);
    const double err = rel_err(got, want);
    worst = std::max(worst, err);
    CHECK_MESSAGE(err < 1e-9, "trial " << trial << " M " << cfg.M);
  }
  MESSAGE("worst relative error " << worst);
}

TEST_CASE("ladder is linear in E3 and its healthy ratio does not depend on E3") {
  MachineConfig a;
  MachineConfig b = a;
  b.E3 = 2.0 * a.E3;
  const OperatingPoint op{0.7, 0.9, 1.0};
  for (const auto& fault : {std::optional<FaultSpec>{}, std::optional<FaultSpec>{FaultSpec{0.3, 120.0, 0.0}}}) {
    const auto ra = third_harmonic_solve(a, fault, op);
    const auto rb = third_harmonic_solve(b, fault, op);
    CHECK(std::abs(rb.V_N3 - 2.0 * ra.V_N3) < 1e-12 * std::abs(rb.V_N3));
    CHECK(std::abs(rb.V_P3 - 2.0 * ra.V_P3) < 1e-12 * std::abs(rb.V_P3));
  }
  const auto ra = third_harmonic_solve(a, std::nullopt, op);
  const auto rb = third_harmonic_solve(b, std::nullopt, op);
  const double rho_a = std::abs(ra.V_N3) / std::abs(ra.V_P3);
  CHECK(rho_a > 0.0);
  CHECK(rho_a == doctest::Approx(std::abs(rb.V_N3) / std::abs(rb.V_P3)).epsilon(1e-12));
}

TEST_CASE("symmetric winding: ratio residual is smallest inside the winding") {
  MachineConfig cfg;
  cfg.Ct = 0.0;
  const OperatingPoint op{1.0, 1.0, 1.0};
  const auto healthy = third_harmonic_solve(cfg, std::nullopt, op);
  const double rho_h = std::abs(healthy.V_N3) / std::abs(healthy.V_P3);
  int best = -1;
  double best_res = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= cfg.M; ++k) {
    const auto f = third_harmonic_solve(cfg, FaultSpec{static_cast<double>(k) / cfg.M, 50.0, 0.0}, op);
    const double res = std::abs(std::abs(f.V_N3) / std::abs(f.V_P3) - rho_h);
    if (res < best_res) {
      best_res = res;
      best = k;
    }
  }
  CHECK(best > 0);
  CHECK(best < cfg.M);
  CHECK(std::abs(static_cast<double>(best) / cfg.M - 0.5) < 0.05);
}

TEST_CASE("operating point mapping helpers") {
  CHECK(reactive_fraction(1.0) == 0.0);
  CHECK(reactive_fraction(0.8) == doctest::Approx(0.6));
  CHECK(reactive_fraction(-0.8) == doctest::Approx(-0.6));
  for (double pf : {-0.85, -0.95, 1.0, 0.9, 0.8}) CHECK(pf_from_reactive(reactive_fraction(pf)) == doctest::Approx(pf));
  CHECK(fault_node(MachineConfig{}, 0.5) == 48);
}

TEST_CASE("sub-harmonic transfer functions") {
  Subharmonic64SConfig cfg;
  const auto g = transfer_gains(cfg, cfg.Rs);
  const auto dc = subharmonic_transfer(cfg, cfg.Rs, 0.0);
  CHECK(std::abs(dc.H1 - g.K1) < 1e-15);
  CHECK(std::abs(dc.H2 - g.K2) < 1e-15);
  CHECK(g.K3 == doctest::Approx(625.0));
  CHECK(g.tau0 == doctest::Approx(0.01875));

  const double w = kTwoPi * 20.0;
  const auto h = subharmonic_transfer(cfg, cfg.Rs, w);
  const cplx z = h.H2 / h.H1;
  const cplx expect = g.K3 / (1.0 + cplx{0.0, w * g.tau0});
  CHECK(std::abs(z - expect) < 1e-12 * std::abs(expect));
  CHECK(std::abs(z) == doctest::Approx(625.0 / std::sqrt(1.0 + std::pow(w * 0.01875, 2))).epsilon(1e-12));
  CHECK(std::abs(z) == doctest::Approx(244.0).epsilon(0.005));
  CHECK_THROWS_AS(subharmonic_transfer(cfg, 0.0, w), Error);
}

TEST_CASE("sub-harmonic circuit gains follow the nodal equations") {
  // Secondary nodal equation at V_N with the machine branch Rs/N^2 || C0 N^2.
  Subharmonic64SConfig cfg;
  const double w = kTwoPi * 20.0;
  for (double rs : {50.0, 700.0, 2500.0, 1e5}) {
    const double N2 = cfg.N * cfg.N;
    const cplx y_m = N2 / rs + cplx{0.0, w * N2 * cfg.C0};
    const cplx v = (1.0 / cfg.Rbpf) / (1.0 / cfg.Rbpf + 1.0 / cfg.Rn + y_m);
    const cplx i = y_m * v;
    const auto h = subharmonic_transfer(cfg, rs, w);
    CHECK(std::abs(h.H2 - v) < 1e-12 * std::abs(v));
    CHECK(std::abs(h.H1 - i) < 1e-12 * std::abs(i));
  }
}

TEST_CASE("60 Hz neutral component") {
  Subharmonic64SConfig cfg;
  CHECK(neutral_60hz_component(cfg, 0.0, 90.0) == 0.0);
  CHECK(neutral_60hz_component(cfg, 0.6, 0.0) == doctest::Approx(0.6 * cfg.Un).epsilon(1e-12));
  CHECK_THROWS_AS(neutral_60hz_component(cfg, 1.5, 90.0), Error);
  for (double x = 0.0; x <= 1.0; x += 0.1) {
    for (double rf : {0.0, 50.0, 90.0, 500.0, 1000.0}) {
      const double v = neutral_60hz_component(cfg, x, rf);
      const auto loc = a64s::locate_fault(v, cfg.Un, cfg.primary_RN(), rf, cfg.C0 * rf);
      CHECK(std::abs(loc.x - x) < 1e-9);
    }
  }
}

TEST_CASE("64S simulation: healthy steady state matches the transfer functions") {
  Subharmonic64SConfig cfg;
  Sim64SOptions opt;
  opt.duration = 1.0;
  for (bool online : {false, true}) {
    opt.online = online;
    const auto sim = simulate_64s_timeseries(cfg, {}, opt);
    const auto pv = signal::extract_phasor(sim.v_n, cfg.f_inj, 2);
    const auto pi = signal::extract_phasor(sim.i_n, cfg.f_inj, 2);
    const auto h = subharmonic_transfer(cfg, cfg.Rs, kTwoPi * cfg.f_inj);
    const double vs = cfg.Vs * std::numbers::sqrt2;
    CHECK(pv.frames.back().magnitude == doctest::Approx(std::abs(h.H2) * vs).epsilon(0.01));
    CHECK(pi.frames.back().magnitude == doctest::Approx(std::abs(h.H1) * vs).epsilon(0.01));
  }
}

TEST_CASE("64S simulation: fault switches to the parallel resistance") {
  Subharmonic64SConfig cfg;
  Sim64SOptions opt;
  opt.duration = 0.5;
  const auto sim = simulate_64s_timeseries(cfg, {FaultSpec{0.5, 90.0, 0.2}}, opt);
  CHECK(sim.rs_eff.front() == cfg.Rs);
  CHECK(sim.rs_eff.back() == doctest::Approx(86.9).epsilon(0.001));
  CHECK(parallel(2500.0, 90.0) == doctest::Approx(2500.0 * 90.0 / 2590.0));
}

TEST_CASE("64S simulation: an open-circuit event changes nothing") {
  Subharmonic64SConfig cfg;
  Sim64SOptions opt;
  opt.duration = 0.5;
  opt.noise_rel = 0.01;
  opt.seed = 5;
  const auto healthy = simulate_64s_timeseries(cfg, {}, opt);
  const auto open = simulate_64s_timeseries(cfg, {FaultSpec{0.5, std::numeric_limits<double>::infinity(), 0.1}}, opt);
  CHECK(healthy.v_n.samples == open.v_n.samples);
  CHECK(healthy.i_n.samples == open.i_n.samples);
}

TEST_CASE("64S simulation: 60 Hz drive appears only while the machine is excited") {
  Subharmonic64SConfig cfg;
  Sim64SOptions opt;
  opt.duration = 0.6;
  const std::vector<FaultSpec> ev{{1.0, 500.0, 0.1}};
  opt.online = false;
  const auto off = simulate_64s_timeseries(cfg, ev, opt);
  opt.online = true;
  const auto on = simulate_64s_timeseries(cfg, ev, opt);
  const auto p_off = signal::extract_phasor(off.v_n, cfg.f1, 6);
  const auto p_on = signal::extract_phasor(on.v_n, cfg.f1, 6);
  CHECK(p_off.frames.back().magnitude < 1e-9);
  CHECK(p_on.frames.back().magnitude > 1.0);
}

TEST_CASE("64G2 scenario: neutral PT scale touches only the neutral channel") {
  MachineConfig cfg;
  Sim64G2Options opt;
  opt.noise_std = 0.0;
  opt.duration = 0.6;
  const auto sim = simulate_64g2_scenario(cfg, {}, {{DisturbanceKind::NeutralPtScale, 0.875, 0.3, std::nullopt, 0.0}}, opt);
  const auto& before = sim.frames[250];
  const auto& after = sim.frames.back();
  CHECK(after.V_N3 == doctest::Approx(0.875 * before.V_N3).epsilon(1e-9));
  CHECK(after.V_P3 == doctest::Approx(before.V_P3).epsilon(1e-9));
}

TEST_CASE("64G2 scenario: stationary healthy record has a constant ratio") {
  MachineConfig cfg;
  Sim64G2Options opt;
  opt.noise_std = 0.0;
  const auto sim = simulate_64g2_scenario(cfg, {}, {}, opt);
  double first = -1.0;
  for (const auto& f : sim.frames) {
    if (!f.valid) continue;
    const double rho = f.V_N3 / f.V_P3;
    if (first < 0.0) first = rho;
    CHECK(rho == doctest::Approx(first).epsilon(1e-9));
  }
  CHECK(first > 0.0);
}

TEST_CASE("64G2 scenario: stopping the machine drains both channels together") {
  MachineConfig cfg;
  Sim64G2Options opt;
  opt.noise_std = 0.0;
  opt.duration = 2.5;
  opt.load_pu = 0.0;
  const auto sim =
      simulate_64g2_scenario(cfg, {}, {{DisturbanceKind::GenStop, 1.0, 0.3, 2.3, 0.0}}, opt);
  const auto& early = sim.frames[250];
  const auto& mid = sim.frames[1300];
  const auto& late = sim.frames[2200];
  CHECK(mid.V_P3 < early.V_P3);
  CHECK(mid.V_N3 < early.V_N3);
  CHECK(late.V_P3 < mid.V_P3);
  CHECK(late.V_N3 < mid.V_N3);
  CHECK(sim.frames.back().V_P3 < 0.05 * early.V_P3);
  CHECK(sim.frames.back().V_N3 < 0.05 * early.V_N3);
}

TEST_CASE("64G2 scenario: preconditions") {
  MachineConfig cfg;
  Sim64G2Options opt;
  CHECK_THROWS_AS(simulate_64g2_scenario(cfg, {FaultSpec{0.1, 50.0, 0.1}, FaultSpec{0.2, 50.0, 0.2}}, {}, opt), Error);
  CHECK_THROWS_AS(simulate_64g2_scenario(cfg, {FaultSpec{1.5, 50.0, 0.1}}, {}, opt), Error);
  DisturbanceSpec bad{DisturbanceKind::NeutralPtScale, 1.5, 0.1, std::nullopt, 0.0};
  CHECK_THROWS_AS(simulate_64g2_scenario(cfg, {}, {bad}, opt), Error);
  DisturbanceSpec no_end{DisturbanceKind::GenStart, 1.0, 0.1, std::nullopt, 0.0};
  CHECK_THROWS_AS(no_end.validate(), Error);
  CHECK_THROWS_AS(disturbance_kind_from_string("brownout"), Error);
  MachineConfig small = cfg;
  small.M = 3;
  CHECK_THROWS_AS(small.validate(), Error);
}
