#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "statorguard/error.hpp"
#include "statorguard/frames.hpp"
#include "statorguard/plant.hpp"
#include "statorguard/signal.hpp"

namespace statorguard::a64s {

struct Vec2 {
  double a = 0.0, b = 0.0;
};

/// Symmetric 2x2 matrix [[xx, xy], [xy, yy]].
struct Sym2 {
  double xx = 0.0, xy = 0.0, yy = 0.0;

  [[nodiscard]] Vec2 operator*(const Vec2& v) const { return {xx * v.a + xy * v.b, xy * v.a + yy * v.b}; }
  [[nodiscard]] double det() const { return xx * yy - xy * xy; }
  [[nodiscard]] bool positive_definite() const { return xx > 0.0 && det() > 0.0; }
};

struct TustinCoeffs {
  double Kd = 0.0;  ///< ohm
  double a0 = 0.0;
};

/// Bilinear map of K3 / (1 + tau0 s) at sampling period T.
TustinCoeffs tustin_coeffs(double K3, double tau0, double T);
/// Algebraic inverse of the a0 map: (T/2)(1 - a0)/(1 + a0).
double tau0_from_a0(double a0, double T);

/// Dual-memory state of the (a0, Kd) estimator.
struct ThetaKafState {
  Vec2 theta{0.0, 0.0};  ///< (a0_hat, Kd_hat)
  Sym2 P{1.0, 0.0, 1.0};
  double sigma_v2 = 1e-6;
  double sigma_e12 = 0.125;
  double prev_vn = 0.0;
  double prev_in = 0.0;
  bool has_prev = false;
};

struct Regression {
  Vec2 phi;
  double u = 0.0;
  bool valid = false;  ///< false on the first sample (no memory yet)
};

/// Builds phi(t) = (-v_n(t-1), i_n(t-1) + i_n(t)) and shifts the memories.
Regression regression_step(ThetaKafState& state, double v_n, double i_n);

struct ThetaUpdate {
  ThetaKafState state;
  double innovation = 0.0;
};

/// Kalman measurement update with random-walk parameters.
ThetaUpdate theta_kaf_update(const ThetaKafState& state, double v_n, const Vec2& phi);

/// One-pole smoother (1 - p) / (z - p), p = exp(-gamma T), unit DC gain.
/// gamma = infinity bypasses it (identity, no delay).
class LowPass {
 public:
  LowPass(double gamma, double T);
  double push(double x);
  [[nodiscard]] double value() const { return y_; }

 private:
  double p_;
  bool bypass_;
  double y_ = 0.0;
  double x_prev_ = 0.0;
};

struct ExtractorState {
  double T = 1e-3;
  double gamma = 10.0;
  double N = 2.0;
  LowPass f_ratio{10.0, 1e-3};
  LowPass f_gain{10.0, 1e-3};
  double ratio_in = 1.0;  ///< last usable (1 - a0)/(1 + a0)
  double tau0_hat = 0.0;
  double rs_hat = 0.0;
  bool degenerate = false;

  ExtractorState() = default;
  ExtractorState(double T_, double gamma_, double N_)
      : T(T_), gamma(gamma_), N(N_), f_ratio(gamma_, T_), f_gain(gamma_, T_) {}
};

struct Extracted {
  double tau0_hat = 0.0;  ///< s
  double rs_hat = 0.0;    ///< primary ohm
  bool degenerate = false;
};

/// Time constant and insulation resistance from (a0_hat, Kd_hat): smoothed,
/// then clamped at zero.
Extracted extract_params(ExtractorState& state, const Vec2& theta_hat);

struct C0KafState {
  double c0_hat = 1e-6;
  double Qv = 1e-10;
  double sigma_w2 = 1e-16;
  double sigma_e22 = 1e-6;
};

/// Scalar Kalman update of C0 from tau0_hat = rs_hat * C0 + e.
C0KafState c0_kaf_update(const C0KafState& state, double tau0_hat, double rs_hat);

struct DetectConfig {
  double settle_s = 0.5;            ///< ignored start-up interval
  double baseline_window_s = 0.5;   ///< healthy interval the baseline is learned on
  double drop_fraction = 0.5;
  double persistence_s = 0.025;
};

struct DetectEvent {
  std::int64_t index = 0;
  double rs_hat = 0.0;
};

struct DetectResult {
  double baseline = 0.0;
  std::optional<DetectEvent> trip;
};

/// Streaming form of the R_s drop detector.
class RsDropDetector {
 public:
  RsDropDetector(DetectConfig cfg, double fs);

  /// Returns true while tripped (latched).
  bool push(std::int64_t index, double rs_hat);
  [[nodiscard]] bool baseline_ready() const { return baseline_ready_; }
  [[nodiscard]] double baseline() const { return baseline_; }
  [[nodiscard]] bool tripped() const { return trip_.has_value(); }
  [[nodiscard]] const std::optional<DetectEvent>& trip() const { return trip_; }

 private:
  DetectConfig cfg_;
  std::int64_t settle_n_, window_n_, persist_n_;
  std::int64_t seen_ = 0;
  std::vector<double> window_;
  double baseline_ = 0.0;
  bool baseline_ready_ = false;
  std::int64_t run_ = 0;
  std::optional<DetectEvent> trip_;
};

/// Batch detector. Throws Error if the baseline window already holds a drop.
DetectResult a64s_detect(std::span<const double> rs_hat, double fs, const DetectConfig& cfg);

inline constexpr double kNoFaultSentinel = 2.0;

enum class LocateStatus { Ok, NoFault, Inconsistent };

struct LocateResult {
  double x = kNoFaultSentinel;
  LocateStatus status = LocateStatus::NoFault;
};

/// Fault position from the 60 Hz neutral voltage (primary rms), rated
/// line-to-ground voltage, primary grounding resistance and the faulted
/// insulation estimates. Results above 1.2 are flagged inconsistent.
LocateResult locate_fault(double v_n60, double Un, double R_N, double rs_f, double tau0_f, bool fault_active = true,
                          double f1 = 60.0);

struct PipelineConfig {
  double fs = 1000.0;
  double f_inj = 20.0;
  double f1 = 60.0;
  int window_cycles = 2;  ///< at f_inj
  double N = 2.0;
  double Un = 138.564;
  double R_N = 1000.0;   ///< primary grounding resistance
  double gamma = 10.0;
  double sigma_v2 = 1e-6;
  double sigma_e12 = 0.0;  ///< 0 = (1% of full scale)^2
  double full_scale = 35.355;
  double sigma_w2 = 1e-16;
  double sigma_e22 = 1e-6;
  Vec2 theta0{0.0, 0.0};
  Sym2 Pi0{1.0, 0.0, 1.0};
  double c0_init = 1e-6;
  double Phi0 = 1e-10;
  DetectConfig detect;

  static PipelineConfig from_circuit(const plant::Subharmonic64SConfig& cfg, double fs);
};

struct TraceRow {
  std::int64_t t_index = 0;
  double t = 0.0;
  double v_n = 0.0;
  double i_n = 0.0;
  double v_n60 = 0.0;
  double a0_hat = 0.0;
  double kd_hat = 0.0;
  double tau0_hat = 0.0;
  double rs_hat = 0.0;
  double c0_hat = 0.0;
  double x_hat = kNoFaultSentinel;
  bool valid = false;
  bool trip = false;
};

/// Band reconstruction, dual KAF, extraction, detection and location in one
/// sequential chain. Feed raw secondary neutral voltage/current samples.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig cfg);

  SubharmonicFrame prefilter(double v_raw, double i_raw);
  const TraceRow& push(double v_raw, double i_raw);

  [[nodiscard]] const std::vector<TraceRow>& trace() const { return trace_; }
  [[nodiscard]] const RsDropDetector& detector() const { return detector_; }
  [[nodiscard]] const ThetaKafState& theta_state() const { return theta_; }
  [[nodiscard]] const C0KafState& c0_state() const { return c0_; }
  [[nodiscard]] const PipelineConfig& config() const { return cfg_; }

 private:
  PipelineConfig cfg_;
  signal::SlidingPhasor pv_, pi_, p60_;
  ThetaKafState theta_;
  ExtractorState extractor_;
  C0KafState c0_;
  RsDropDetector detector_;
  std::int64_t n_ = 0;
  std::vector<TraceRow> trace_;
};

std::vector<TraceRow> run_pipeline(const signal::TimeSeries& v_n, const signal::TimeSeries& i_n,
                                   const PipelineConfig& cfg);

}  // namespace statorguard::a64s
