#pragma once

#include <cstdint>

namespace statorguard {

/// Per-sample third-harmonic magnitudes (peak volts) at the terminal and
/// neutral measurement points, with the operating point they came from.
struct HarmonicFrame {
  std::int64_t t_index = 0;
  double V_P3 = 0.0;
  double V_N3 = 0.0;
  double load_pu = 1.0;
  double pf = 1.0;
  bool valid = false;
};

/// Per-sample neutral-circuit quantities seen by the injection scheme.
/// v_n / i_n are secondary-side values after the 20 Hz band reconstruction;
/// v_n60 is the 60 Hz neutral voltage magnitude in primary rms volts.
struct SubharmonicFrame {
  std::int64_t t_index = 0;
  double v_n = 0.0;
  double i_n = 0.0;
  double v_n60 = 0.0;
  bool valid = false;
};

}  // namespace statorguard
