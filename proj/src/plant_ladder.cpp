#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "statorguard/plant.hpp"

namespace statorguard::plant {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double progress(double t, double t_on, double ramp) {
  if (t < t_on) return 0.0;
  if (ramp <= 0.0) return 1.0;
  return std::min(1.0, (t - t_on) / ramp);
}
}  // namespace

void MachineConfig::validate() const {
  if (!(E3 > 0.0)) throw Error("machine.E3 must be positive");
  if (!(Cs > 0.0)) throw Error("machine.Cs must be positive");
  if (Ct < 0.0) throw Error("machine.Ct must be non-negative");
  if (!(N > 0.0)) throw Error("machine.N must be positive");
  if (!(Rn > 0.0)) throw Error("machine.Rn must be positive");
  if (M < 4) throw Error("machine.M must be at least 4");
  if (!(f1 > 0.0)) throw Error("machine.f1 must be positive");
  if (e3_coeffs[0] + e3_coeffs[1] > 1.5) throw Error("machine.e3_coeffs: c0 + c1 exceeds 1.5");
}

void FaultSpec::validate() const {
  if (!(x >= 0.0 && x <= 1.0)) throw Error("fault.x must lie in [0, 1]");
  if (!(Rf >= 0.0)) throw Error("fault.Rf must be non-negative");
  if (!(t_on >= 0.0)) throw Error("fault.t_on must be non-negative");
}

std::string_view to_string(DisturbanceKind kind) {
  switch (kind) {
    case DisturbanceKind::NeutralPtScale: return "neutral_pt_scale";
    case DisturbanceKind::TerminalPtScale: return "terminal_pt_scale";
    case DisturbanceKind::LoadStep: return "load_step";
    case DisturbanceKind::PfSwing: return "pf_swing";
    case DisturbanceKind::GenStart: return "gen_start";
    case DisturbanceKind::GenStop: return "gen_stop";
  }
  return "unknown";
}

DisturbanceKind disturbance_kind_from_string(std::string_view name) {
  for (auto kind : {DisturbanceKind::NeutralPtScale, DisturbanceKind::TerminalPtScale, DisturbanceKind::LoadStep,
                    DisturbanceKind::PfSwing, DisturbanceKind::GenStart, DisturbanceKind::GenStop}) {
    if (to_string(kind) == name) return kind;
  }
  throw Error("unknown disturbance kind '" + std::string(name) + "'");
}

void DisturbanceSpec::validate() const {
  if (!(t_on >= 0.0)) throw Error("disturbance.t_on must be non-negative");
  if (t_off && !(*t_off > t_on)) throw Error("disturbance.t_off must be after t_on");
  if (ramp < 0.0) throw Error("disturbance.ramp must be non-negative");
  switch (kind) {
    case DisturbanceKind::NeutralPtScale:
    case DisturbanceKind::TerminalPtScale:
      if (!(magnitude > 0.0 && magnitude <= 1.0)) throw Error("scale disturbance magnitude must lie in (0, 1]");
      break;
    case DisturbanceKind::LoadStep:
      if (!(magnitude >= 0.0 && magnitude <= 1.2)) throw Error("load_step target must lie in [0, 1.2] pu");
      break;
    case DisturbanceKind::PfSwing:
      if (!(std::abs(magnitude) >= 0.8 && std::abs(magnitude) <= 1.0)) throw Error("pf_swing target |pf| must lie in [0.8, 1]");
      break;
    case DisturbanceKind::GenStart:
    case DisturbanceKind::GenStop:
      if (!t_off) throw Error("gen_start/gen_stop need t_off (end of the speed ramp)");
      break;
  }
}

double reactive_fraction(double pf) {
  const double a = std::clamp(std::abs(pf), 0.0, 1.0);
  const double q = std::sqrt(1.0 - a * a);
  return pf < 0.0 ? -q : q;
}

double pf_from_reactive(double q) {
  const double a = std::sqrt(std::max(0.0, 1.0 - q * q));
  return q < 0.0 ? -a : a;
}

double grounding_resistor_sizing(double N, double f1, double C_total) {
  if (!(N > 0.0 && f1 > 0.0 && C_total > 0.0)) throw Error("grounding_resistor_sizing: inputs must be positive");
  return 1.0 / (N * N * kTwoPi * f1 * C_total);
}

double e3_of_operating_point(const MachineConfig& cfg, double load_pu, double pf) {
  if (!(load_pu >= 0.0 && load_pu <= 1.2)) throw Error("operating point: load_pu must lie in [0, 1.2]");
  if (!(std::abs(pf) >= 0.8 - 1e-12 && std::abs(pf) <= 1.0)) throw Error("operating point: |pf| must lie in [0.8, 1]");
  const auto& c = cfg.e3_coeffs;
  return cfg.E3 * (c[0] + c[1] * load_pu + c[2] * (1.0 - std::abs(pf)));
}

int fault_node(const MachineConfig& cfg, double x) {
  return static_cast<int>(std::lround(std::clamp(x, 0.0, 1.0) * cfg.M));
}

std::vector<cplx> segment_emfs(const MachineConfig& cfg, const OperatingPoint& op) {
  const double total = e3_of_operating_point(cfg, op.load_pu, op.pf) * op.speed;
  const double tilt = cfg.tilt_pf * reactive_fraction(op.pf) + cfg.tilt_load * op.load_pu;
  std::vector<cplx> e(static_cast<std::size_t>(cfg.M));
  for (int k = 0; k < cfg.M; ++k) {
    const double pos = (k + 0.5) / cfg.M;
    e[static_cast<std::size_t>(k)] = total / cfg.M * (1.0 + tilt * (2.0 * pos - 1.0));
  }
  return e;
}

ThirdHarmonicPhasors third_harmonic_solve(const MachineConfig& cfg, const std::optional<FaultSpec>& fault,
                                          const OperatingPoint& op) {
  if (op.speed <= 0.0) return {0.0, 0.0};
  const auto emf = segment_emfs(cfg, op);
  const int M = cfg.M;
  const double omega = kTwoPi * 3.0 * cfg.f1 * op.speed;
  const cplx y_seg{0.0, omega * cfg.Cs / M};

  // Every node sits at V0 plus the EMF accumulated from the neutral, so KCL
  // summed over all shunt branches fixes V0.
  cplx sum_y{0.0, 0.0};
  cplx sum_ys{0.0, 0.0};
  cplx cumulative{0.0, 0.0};
  const int fnode = fault ? fault_node(cfg, fault->x) : -1;
  cplx s_fault{0.0, 0.0};
  for (int j = 0; j <= M; ++j) {
    if (j > 0) cumulative += emf[static_cast<std::size_t>(j - 1)];
    cplx y = (j == 0 || j == M) ? 0.5 * y_seg : y_seg;
    if (j == 0) y += 1.0 / (3.0 * cfg.N * cfg.N * cfg.Rn);
    if (j == M) y += cplx{0.0, omega * cfg.Ct};
    if (j == fnode) {
      s_fault = cumulative;
      if (fault->Rf > 0.0) y += 1.0 / fault->Rf;
    }
    sum_y += y;
    sum_ys += y * cumulative;
  }

  cplx v0;
  if (fault && fault->Rf == 0.0) {
    v0 = -s_fault;  // faulted node pinned to ground
  } else {
    v0 = -sum_ys / sum_y;
  }
  return {v0, v0 + cumulative};
}

ScenarioState scenario_state(const std::vector<DisturbanceSpec>& disturbances, double base_load, double base_pf,
                             double t) {
  ScenarioState s;
  s.op.load_pu = base_load;
  s.op.pf = base_pf;
  double q = reactive_fraction(base_pf);
  for (const auto& d : disturbances) {
    const double on = progress(t, d.t_on, d.ramp);
    const double off = d.t_off ? progress(t, *d.t_off, d.ramp) : 0.0;
    const double w = on - off;
    switch (d.kind) {
      case DisturbanceKind::NeutralPtScale:
        s.neutral_scale *= 1.0 + (d.magnitude - 1.0) * w;
        break;
      case DisturbanceKind::TerminalPtScale:
        s.terminal_scale *= 1.0 + (d.magnitude - 1.0) * w;
        break;
      case DisturbanceKind::LoadStep:
        s.op.load_pu += (d.magnitude - s.op.load_pu) * w;
        break;
      case DisturbanceKind::PfSwing:
        q += (reactive_fraction(d.magnitude) - q) * w;
        break;
      case DisturbanceKind::GenStart: {
        const double span = *d.t_off - d.t_on;
        s.op.speed *= std::clamp((t - d.t_on) / span, 0.0, 1.0);
        break;
      }
      case DisturbanceKind::GenStop: {
        const double span = *d.t_off - d.t_on;
        s.op.speed *= 1.0 - std::clamp((t - d.t_on) / span, 0.0, 1.0);
        break;
      }
    }
  }
  s.op.pf = pf_from_reactive(q);
  return s;
}

std::vector<HarmonicFrame> harmonic_frames(const signal::TimeSeries& v_n, const signal::TimeSeries& v_p, double f3,
                                           int window_cycles, const std::vector<OperatingPoint>* ops) {
  if (v_n.size() != v_p.size()) throw Error("harmonic_frames: channel lengths differ");
  if (v_n.fs != v_p.fs) throw Error("harmonic_frames: channel sampling rates differ");
  const std::size_t window = signal::window_length(v_n.fs, f3, window_cycles);
  if (window > v_n.size()) throw Error("harmonic_frames: record shorter than one phasor window");
  signal::SlidingPhasor pn(v_n.fs, f3, window, v_n.t0);
  signal::SlidingPhasor pp(v_p.fs, f3, window, v_p.t0);
  std::vector<HarmonicFrame> frames(v_n.size());
  // With a known speed record the window follows the machine's electrical
  // angle, as a frequency-tracking relay would.
  const bool tracked = ops && ops->size() == v_n.size();
  double cycles = f3 * v_n.t0;
  for (std::size_t i = 0; i < v_n.size(); ++i) {
    signal::PhasorFrame fn, fp;
    if (tracked) {
      fn = pn.push_tracked(v_n.samples[i], cycles);
      fp = pp.push_tracked(v_p.samples[i], cycles);
      cycles += f3 * (*ops)[i].speed / v_n.fs;
    } else {
      fn = pn.push(v_n.samples[i]);
      fp = pp.push(v_p.samples[i]);
    }
    auto& f = frames[i];
    f.t_index = static_cast<std::int64_t>(i);
    f.V_N3 = fn.magnitude;
    f.V_P3 = fp.magnitude;
    f.valid = fn.valid && fp.valid;
    if (ops && i < ops->size()) {
      f.load_pu = (*ops)[i].load_pu;
      f.pf = (*ops)[i].pf;
    }
  }
  return frames;
}

Sim64G2Result simulate_64g2_scenario(const MachineConfig& cfg, const std::vector<FaultSpec>& faults,
                                     const std::vector<DisturbanceSpec>& disturbances, const Sim64G2Options& opt) {
  cfg.validate();
  if (faults.size() > 1) throw Error("simulate_64g2_scenario: single-fault model, got " + std::to_string(faults.size()));
  for (const auto& f : faults) f.validate();
  for (const auto& d : disturbances) d.validate();
  if (!(opt.fs > 2.0 * 3.0 * cfg.f1)) throw Error("simulate_64g2_scenario: fs too low for the third harmonic");
  if (!(opt.duration > 0.0)) throw Error("simulate_64g2_scenario: duration must be positive");

  const auto count = static_cast<std::size_t>(std::llround(opt.duration * opt.fs));
  Sim64G2Result out;
  out.v_n.fs = out.v_p.fs = opt.fs;
  out.v_n.samples.resize(count);
  out.v_p.samples.resize(count);
  out.ops.resize(count);

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::optional<FaultSpec> fault = faults.empty() ? std::nullopt : std::optional<FaultSpec>(faults.front());

  double cycles = 0.0;  // accumulated third-harmonic cycles (speed varies)
  OperatingPoint cached_op{-1.0, 0.0, -1.0};
  bool cached_fault = false;
  ThirdHarmonicPhasors ph{};
  for (std::size_t n = 0; n < count; ++n) {
    const double t = static_cast<double>(n) / opt.fs;
    const auto state = scenario_state(disturbances, opt.load_pu, opt.pf, t);
    const bool fault_on = fault && t >= fault->t_on;
    if (state.op.load_pu != cached_op.load_pu || state.op.pf != cached_op.pf || state.op.speed != cached_op.speed ||
        fault_on != cached_fault) {
      ph = third_harmonic_solve(cfg, fault_on ? fault : std::nullopt, state.op);
      cached_op = state.op;
      cached_fault = fault_on;
    }
    const double arg = kTwoPi * (cycles - std::floor(cycles));
    const cplx rot{std::cos(arg), std::sin(arg)};
    double vn = state.neutral_scale * (ph.V_N3 * rot).real();
    double vp = state.terminal_scale * (ph.V_P3 * rot).real();
    if (opt.noise_std > 0.0) {
      vn += opt.noise_std * gauss(rng);
      vp += opt.noise_std * gauss(rng);
    }
    out.v_n.samples[n] = vn;
    out.v_p.samples[n] = vp;
    out.ops[n] = state.op;
    cycles += 3.0 * cfg.f1 * state.op.speed / opt.fs;
  }
  out.frames = harmonic_frames(out.v_n, out.v_p, 3.0 * cfg.f1, opt.window_cycles, &out.ops);
  return out;
}

}  // namespace statorguard::plant
