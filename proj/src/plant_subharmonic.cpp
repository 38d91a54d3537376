#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "statorguard/plant.hpp"

namespace statorguard::plant {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

cplx neutral_60hz_phasor(const Subharmonic64SConfig& cfg, double x, double R, double un, double f) {
  const double RN = cfg.primary_RN();
  const double omega = kTwoPi * f;
  return x * un * RN / cplx{RN + R, omega * cfg.C0 * R * RN};
}
}  // namespace

void Subharmonic64SConfig::validate() const {
  if (!(N > 0.0)) throw Error("sub64s.N must be positive");
  if (!(Rn > 0.0 && Rbpf > 0.0 && Rs > 0.0)) throw Error("sub64s resistances must be positive");
  if (!(C0 > 0.0)) throw Error("sub64s.C0 must be positive");
  if (!(Vs > 0.0)) throw Error("sub64s.Vs must be positive");
  if (!(f_inj > 0.0 && f_inj < f1)) throw Error("sub64s.f_inj must lie in (0, f1)");
  if (!(Un > 0.0)) throw Error("sub64s.Un must be positive");
  if (unbalance < 0.0) throw Error("sub64s.unbalance must be non-negative");
}

double parallel(double a, double b) {
  if (std::isinf(a)) return b;
  if (std::isinf(b)) return a;
  return a * b / (a + b);
}

TransferGains transfer_gains(const Subharmonic64SConfig& cfg, double Rs_eff) {
  const double N2 = cfg.N * cfg.N;
  const double RN = cfg.Rn;
  const double D = N2 * RN * cfg.Rbpf + Rs_eff * (RN + cfg.Rbpf);
  return TransferGains{
      .K1 = N2 * RN / D,
      .K2 = RN * Rs_eff / D,
      .K3 = Rs_eff / N2,
      .alpha = N2 * RN * cfg.Rbpf / D,
      .tau0 = Rs_eff * cfg.C0,
  };
}

SubharmonicTransfer subharmonic_transfer(const Subharmonic64SConfig& cfg, double Rs_eff, double omega) {
  if (!(Rs_eff > 0.0) || omega < 0.0) throw Error("subharmonic_transfer: need Rs_eff > 0 and omega >= 0");
  const auto g = transfer_gains(cfg, Rs_eff);
  const cplx s{0.0, omega};
  const cplx pole = 1.0 + g.alpha * g.tau0 * s;
  return {g.K1 * (1.0 + g.tau0 * s) / pole, g.K2 / pole};
}

double neutral_60hz_component(const Subharmonic64SConfig& cfg, double x, double Rf) {
  if (!(x >= 0.0 && x <= 1.0)) throw Error("neutral_60hz_component: x must lie in [0, 1]");
  if (!(Rf >= 0.0)) throw Error("neutral_60hz_component: Rf must be non-negative");
  const double RN = cfg.primary_RN();
  const double omega = kTwoPi * cfg.f1;
  return x * cfg.Un * RN / std::hypot(RN + Rf, omega * cfg.C0 * Rf * RN);
}

double SpeedProfile::at(double t) const {
  if (points.empty()) return 1.0;
  if (t <= points.front().first) return points.front().second;
  if (t >= points.back().first) return points.back().second;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const auto& [t1, s1] = points[i];
    if (t <= t1) {
      const auto& [t0, s0] = points[i - 1];
      if (t1 <= t0) return s1;
      return s0 + (s1 - s0) * (t - t0) / (t1 - t0);
    }
  }
  return points.back().second;
}

Sim64SResult simulate_64s_timeseries(const Subharmonic64SConfig& cfg, const std::vector<FaultSpec>& events,
                                     const Sim64SOptions& opt) {
  cfg.validate();
  for (const auto& e : events) e.validate();
  if (!(opt.fs >= 20.0 * cfg.f_inj)) throw Error("simulate_64s_timeseries: fs must be at least 20 f_inj");
  if (!(opt.duration > 0.0)) throw Error("simulate_64s_timeseries: duration must be positive");
  if (opt.noise_rel < 0.0) throw Error("simulate_64s_timeseries: noise must be non-negative");

  auto ordered = events;
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.t_on < b.t_on; });

  const auto count = static_cast<std::size_t>(std::llround(opt.duration * opt.fs));
  const double T = 1.0 / opt.fs;
  const double N2 = cfg.N * cfg.N;
  const double g_bpf = 1.0 / cfg.Rbpf;
  const double g_n = 1.0 / cfg.Rn;
  const double c_sec = N2 * cfg.C0;
  const double vs_peak = cfg.Vs * std::numbers::sqrt2;

  const auto healthy = subharmonic_transfer(cfg, cfg.Rs, kTwoPi * cfg.f_inj);
  const double v_noise = opt.noise_rel * std::abs(healthy.H2) * vs_peak;
  const double i_noise = opt.noise_rel * std::abs(healthy.H1) * vs_peak;

  Sim64SResult out;
  out.v_n.fs = out.i_n.fs = opt.fs;
  out.v_n.samples.resize(count);
  out.i_n.samples.resize(count);
  out.rs_eff.resize(count);

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  double v_prev = 0.0;
  double vs_prev = 0.0;
  double cycles60 = 0.0;
  for (std::size_t n = 0; n < count; ++n) {
    const double t = static_cast<double>(n) * T;
    const FaultSpec* active = nullptr;
    for (const auto& e : ordered) {
      if (t >= e.t_on) active = &e;
    }
    const double rs_eff = active ? parallel(cfg.Rs, active->Rf) : cfg.Rs;
    const double g_m = rs_eff > 0.0 ? N2 / rs_eff : std::numeric_limits<double>::infinity();
    const double vs = vs_peak * std::sin(kTwoPi * cfg.f_inj * t);

    double v = 0.0;
    if (std::isinf(g_m)) {
      v = 0.0;  // metallic fault with zero insulation resistance
    } else if (n == 0) {
      v = 0.0;
    } else {
      // C dV/dt = g_bpf (vs - v) - (g_n + g_m) v, trapezoidal over [n-1, n].
      const double g_tot = g_bpf + g_n + g_m;
      const double lhs = c_sec / T + 0.5 * g_tot;
      const double rhs = v_prev * (c_sec / T - 0.5 * g_tot) + 0.5 * g_bpf * (vs + vs_prev);
      v = rhs / lhs;
    }
    const double i = g_bpf * (vs - v) - g_n * v;

    double v60 = 0.0;
    const double speed = opt.speed ? opt.speed->at(t) : 1.0;
    if (opt.online && speed > 0.0) {
      const double un = cfg.Un * speed;
      const double f = cfg.f1 * speed;
      cplx phasor{0.0, cfg.unbalance * un};
      if (active && std::isfinite(active->Rf)) phasor += neutral_60hz_phasor(cfg, active->x, rs_eff, un, f);
      const double arg = kTwoPi * (cycles60 - std::floor(cycles60));
      v60 = std::numbers::sqrt2 * (phasor * cplx{std::cos(arg), std::sin(arg)}).real() / cfg.N;
      cycles60 += f * T;
    }

    double vm = v + v60;
    double im = i;
    if (opt.noise_rel > 0.0) {
      vm += v_noise * gauss(rng);
      im += i_noise * gauss(rng);
    }
    out.v_n.samples[n] = vm;
    out.i_n.samples[n] = im;
    out.rs_eff[n] = rs_eff;
    v_prev = v;
    vs_prev = vs;
  }
  return out;
}

}  // namespace statorguard::plant
