#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "statorguard/frames.hpp"
#include "statorguard/signal.hpp"

namespace statorguard::plant {

using cplx = std::complex<double>;

/// Lumped third-harmonic model of the stator winding.
///
/// The winding is M equal EMF segments between M+1 nodes (node 0 = neutral,
/// node M = terminal). Cs is spread over the nodes trapezoidally (Cs/M per
/// interior node, Cs/(2M) at each end) so that the healthy symmetric machine
/// splits the third harmonic evenly. Ct sits on the terminal node and the
/// neutral returns to ground through 3*N^2*Rn.
struct MachineConfig {
  double E3 = 10.0;          ///< rated third-harmonic EMF, peak volts
  double Cs = 7.5e-6;        ///< winding-to-ground capacitance, F
  double Ct = 0.75e-6;       ///< terminal shunt capacitance, F
  double N = 2.0;            ///< grounding transformer turns ratio
  double Rn = 87.5;          ///< secondary neutral resistor, ohm (N^2 Rn = 350 ohm)
  int M = 96;                ///< ladder segments
  double f1 = 60.0;          ///< fundamental, Hz
  std::array<double, 3> e3_coeffs{0.4, 0.6, 0.0};
  /// Linear tilt of the EMF distribution along the winding per unit of
  /// signed reactive fraction (lag positive) and per unit load. Zero tilt
  /// keeps the healthy ratio independent of the operating point.
  double tilt_pf = 0.34;
  double tilt_load = 0.0;

  void validate() const;
};

struct FaultSpec {
  double x = 0.0;     ///< 0 = neutral, 1 = terminal
  double Rf = 50.0;   ///< ohm, primary
  double t_on = 0.0;  ///< s

  void validate() const;
};

enum class DisturbanceKind { NeutralPtScale, TerminalPtScale, LoadStep, PfSwing, GenStart, GenStop };

std::string_view to_string(DisturbanceKind kind);
DisturbanceKind disturbance_kind_from_string(std::string_view name);

/// Scenario event. Scale kinds take a factor in (0, 1]; load/pf kinds take
/// the target value. `ramp` is the transition time (0 = step). For
/// gen_start/gen_stop the speed ramps linearly between t_on and t_off.
struct DisturbanceSpec {
  DisturbanceKind kind = DisturbanceKind::NeutralPtScale;
  double magnitude = 1.0;
  double t_on = 0.0;
  std::optional<double> t_off;
  double ramp = 0.0;

  void validate() const;
};

struct Subharmonic64SConfig {
  double N = 2.0;
  double Rn = 250.0;        ///< secondary, ohm
  double Rbpf = 8.0;        ///< ohm
  double Vs = 25.0;         ///< injection, volts rms
  double f_inj = 20.0;      ///< Hz
  double Rs = 2500.0;       ///< healthy insulation resistance, primary ohm
  double C0 = 7.5e-6;       ///< total coupling capacitance, F
  double Un = 138.564;      ///< rated line-to-ground voltage, primary volts rms
  double f1 = 60.0;         ///< Hz
  double unbalance = 0.01;  ///< healthy neutral displacement as a fraction of Un

  [[nodiscard]] double primary_RN() const { return N * N * Rn; }
  void validate() const;
};

struct OperatingPoint {
  double load_pu = 1.0;
  double pf = 1.0;     ///< signed: lagging positive, leading negative
  double speed = 1.0;  ///< per unit of synchronous speed
};

/// Signed reactive fraction sin(acos|pf|), positive for lagging pf.
double reactive_fraction(double pf);
/// Inverse of reactive_fraction; q = 0 maps to unity pf.
double pf_from_reactive(double q);

/// Neutral resistor giving R = Xc at the fundamental: 1 / (N^2 2 pi f1 C).
double grounding_resistor_sizing(double N, double f1, double C_total);

/// E3 * (c0 + c1 load + c2 (1 - |pf|)).
double e3_of_operating_point(const MachineConfig& cfg, double load_pu, double pf);

struct ThirdHarmonicPhasors {
  cplx V_N3;
  cplx V_P3;
};

/// Nearest ladder node to a fault position.
int fault_node(const MachineConfig& cfg, double x);

/// Solves the ladder at 3 * f1 * speed. The EMF scales with speed.
ThirdHarmonicPhasors third_harmonic_solve(const MachineConfig& cfg, const std::optional<FaultSpec>& fault,
                                          const OperatingPoint& op);

/// Segment EMFs (complex, co-phasal) for the operating point.
std::vector<cplx> segment_emfs(const MachineConfig& cfg, const OperatingPoint& op);

struct SubharmonicTransfer {
  cplx H1;  ///< I_N / V_s, siemens
  cplx H2;  ///< V_N / V_s
};

struct TransferGains {
  double K1, K2, K3, alpha, tau0;
};

TransferGains transfer_gains(const Subharmonic64SConfig& cfg, double Rs_eff);
SubharmonicTransfer subharmonic_transfer(const Subharmonic64SConfig& cfg, double Rs_eff, double omega);

double parallel(double a, double b);

/// 60 Hz neutral voltage (primary rms) for a fault at x whose path to ground
/// has resistance Rf. The simulator passes the faulted insulation Rs || Rf.
double neutral_60hz_component(const Subharmonic64SConfig& cfg, double x, double Rf);

/// Piecewise-linear speed profile, held constant outside the breakpoints.
struct SpeedProfile {
  std::vector<std::pair<double, double>> points;  ///< (t, speed)
  [[nodiscard]] double at(double t) const;
};

struct Sim64SOptions {
  double duration = 3.0;
  double fs = 1000.0;
  double noise_rel = 0.0;  ///< noise std as a fraction of each channel's healthy peak
  std::uint64_t seed = 0;
  bool online = true;      ///< machine excited: 60 Hz components present
  std::optional<SpeedProfile> speed;
};

struct Sim64SResult {
  signal::TimeSeries v_n;  ///< secondary neutral voltage
  signal::TimeSeries i_n;  ///< secondary machine-branch current
  std::vector<double> rs_eff;
};

/// Integrates the one-state injection circuit with the trapezoidal rule.
/// Each event is active from its onset until the next one; the active fault
/// puts Rf in parallel with Rs and adds the 60 Hz drive of that combined
/// resistance to V_N.
Sim64SResult simulate_64s_timeseries(const Subharmonic64SConfig& cfg, const std::vector<FaultSpec>& events,
                                     const Sim64SOptions& opt);

struct Sim64G2Options {
  double duration = 0.8;
  double fs = 1000.0;
  double load_pu = 1.0;
  double pf = 1.0;
  double noise_std = 0.01;  ///< volts on each waveform sample
  std::uint64_t seed = 0;
  int window_cycles = 3;    ///< phasor window at 3 f1
};

struct Sim64G2Result {
  std::vector<HarmonicFrame> frames;
  signal::TimeSeries v_n;  ///< neutral third-harmonic waveform as measured
  signal::TimeSeries v_p;  ///< terminal third-harmonic waveform as measured
  std::vector<OperatingPoint> ops;
};

/// Operating point and channel scale factors at time t.
struct ScenarioState {
  OperatingPoint op;
  double neutral_scale = 1.0;
  double terminal_scale = 1.0;
};

ScenarioState scenario_state(const std::vector<DisturbanceSpec>& disturbances, double base_load, double base_pf,
                             double t);

/// Converts measured third-harmonic waveforms to frames.
std::vector<HarmonicFrame> harmonic_frames(const signal::TimeSeries& v_n, const signal::TimeSeries& v_p,
                                           double f3, int window_cycles, const std::vector<OperatingPoint>* ops);

/// Third-harmonic scenario: at most one fault (more is rejected).
Sim64G2Result simulate_64g2_scenario(const MachineConfig& cfg, const std::vector<FaultSpec>& faults,
                                     const std::vector<DisturbanceSpec>& disturbances, const Sim64G2Options& opt);

}  // namespace statorguard::plant
