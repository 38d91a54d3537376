#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "statorguard/error.hpp"

namespace statorguard::signal {

/// Uniformly sampled real signal.
struct TimeSeries {
  double fs = 1000.0;
  double t0 = 0.0;
  std::vector<double> samples;

  [[nodiscard]] std::size_t size() const { return samples.size(); }
  [[nodiscard]] double time_at(std::size_t n) const {
    return t0 + static_cast<double>(n) / fs;
  }
};

struct Tone {
  double freq = 0.0;
  double amplitude = 0.0;
  double phase = 0.0;
};

/// One phasor per input sample. Frames before the first full window carry
/// valid == false but keep the 1:1 alignment with the samples.
struct PhasorFrame {
  double magnitude = 0.0;
  double phase = 0.0;
  bool valid = false;

  [[nodiscard]] std::complex<double> value() const { return std::polar(magnitude, phase); }
};

struct PhasorSeries {
  double f0 = 0.0;
  int window_cycles = 1;
  std::size_t window_samples = 0;
  std::vector<PhasorFrame> frames;
};

/// Sum of sinusoids A cos(2 pi f t + phi) plus seeded Gaussian noise.
/// Throws Error when any tone is at or above fs/2.
TimeSeries synth_waveform(std::span<const Tone> tones, double fs, double duration,
                          double noise_std, std::uint64_t seed = 0);

/// Window length in samples for `cycles` periods of f0 at fs (rounded).
std::size_t window_length(double fs, double f0, int cycles);

/// Streaming single-bin phasor estimator.
///
/// Keeps running correlations of the input against cos/sin of the absolute
/// sample time and the running Gram sums of the basis, then solves the 2x2
/// least-squares problem each sample. For windows spanning whole cycles the
/// Gram matrix is N/2 * I and this is exactly the one-bin DFT; for fractional
/// windows a pure tone at f0 is still recovered exactly. All running sums are
/// recomputed from the buffer every `refresh_windows` windows so rounding
/// drift stays bounded.
class SlidingPhasor {
 public:
  SlidingPhasor(double fs, double f0, std::size_t window_samples, double t0 = 0.0,
                int refresh_windows = 10);

  PhasorFrame push(double x);
  /// Frequency-tracking form: the basis is cos/sin of 2 pi `cycles`, the
  /// caller's accumulated phase of the tracked component.
  PhasorFrame push_tracked(double x, double cycles);

  [[nodiscard]] std::size_t window() const { return window_; }
  [[nodiscard]] double frequency() const { return f0_; }
  /// Last fitted phasor as a complex number (a - j b).
  [[nodiscard]] std::complex<double> last() const { return last_; }
  /// Value of the fitted sinusoid at the most recent sample time.
  [[nodiscard]] double reconstruct_last() const;

 private:
  double fs_;
  double f0_;
  double omega_;
  double t0_;
  std::size_t window_;
  std::size_t refresh_every_;
  std::uint64_t n_ = 0;

  std::vector<double> xs_, cs_, ss_;
  std::size_t head_ = 0;
  std::size_t filled_ = 0;
  std::size_t since_refresh_ = 0;

  double sxc_ = 0, sxs_ = 0, scc_ = 0, sss_ = 0, scs_ = 0;
  std::complex<double> last_{0.0, 0.0};
  double last_c_ = 1.0, last_s_ = 0.0;

  void refresh();
  PhasorFrame push_basis(double x, double c, double s);
};

/// Batch form of SlidingPhasor over a whole series.
/// Throws Error if the window is longer than the series or f0 >= fs/2.
PhasorSeries extract_phasor(const TimeSeries& ts, double f0, int window_cycles);

/// Reads `t,<chan1>,<chan2>,...` with uniformly spaced time column.
std::map<std::string, TimeSeries> ingest_csv(const std::string& path);

/// Writes channels sharing fs and t0 as `t,<name>...` with round-trip precision.
void write_csv(const std::string& path, const std::vector<std::string>& names,
               const std::vector<const TimeSeries*>& channels);

}  // namespace statorguard::signal
