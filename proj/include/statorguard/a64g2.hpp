#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "statorguard/error.hpp"
#include "statorguard/frames.hpp"

namespace statorguard::a64g2 {

/// Scalar Kalman tracker of the neutral/terminal third-harmonic ratio.
struct RatioKafState {
  double rho_hat = 0.5;
  double P = 1.0;
  double Q = 1e-8;
  double R = 1e-4;
  double Pi0 = 1.0;
  std::int64_t t = 0;
};

struct KafStep {
  RatioKafState state;
  double residual = 0.0;  ///< innovation V_N3 - V_P3 * rho_hat(t-1)
  double gain = 0.0;
};

/// One measurement update. V_P3 = 0 is legal and leaves rho_hat unchanged.
KafStep kaf_update(const RatioKafState& state, double V_P3, double V_N3);

struct DetectorConfig {
  int L = 12;
  double beta = 0.005;
  int persistence = 12;
  double Q = 1e-8;
  double R = 1e-4;
  double Pi0 = 1.0;
  std::optional<double> rho0;  ///< default: first valid V_N3 / V_P3
  /// Frames whose V_P3 + V_N3 falls below this many volts are treated as
  /// not measurable (machine stopped) and skipped like warm-up frames.
  double min_signal = 3.0;

  void validate() const;
};

struct OperateRestraint {
  double J_AO = 0.0;
  double J_AR = 0.0;
};

/// Windowed operate/restraint sums. `residuals` and `vn3s` hold the most
/// recent values (oldest first), at least min(t, L+1) of them; t counts
/// accepted samples starting at 1.
OperateRestraint operate_restraint(std::span<const double> residuals, std::span<const double> vn3s,
                                   const DetectorConfig& cfg, std::int64_t t);

struct TraceRow {
  std::int64_t t_index = 0;
  double V_P3 = 0.0;
  double V_N3 = 0.0;
  double rho_hat = 0.0;
  double residual = 0.0;
  double J_AO = 0.0;
  double J_AR = 0.0;
  double margin = 0.0;  ///< J_AO / (beta J_AR)
  bool active = false;  ///< frame accepted (valid and supervised)
  bool trip = false;    ///< latched trip
};

struct SchemeTrace {
  std::vector<TraceRow> rows;
  std::optional<std::int64_t> first_trip_index;

  /// Samples from `onset_index` to the first trip, if it tripped at or after onset.
  [[nodiscard]] std::optional<std::int64_t> latency_from(std::int64_t onset_index) const;
  [[nodiscard]] double max_margin(std::int64_t from_index = 0) const;
};

/// Shared window/persistence machinery of both 64G2 variants.
class TripLogic {
 public:
  explicit TripLogic(const DetectorConfig& cfg, double threshold);

  /// Feeds one accepted sample; returns (J_AO, J_AR, inequality held).
  OperateRestraint push(double residual, double vn3, bool& inequality);
  [[nodiscard]] bool tripped() const { return tripped_; }
  [[nodiscard]] std::int64_t t() const { return t_; }
  [[nodiscard]] double threshold() const { return threshold_; }

 private:
  DetectorConfig cfg_;
  double threshold_;
  std::deque<double> residuals_;
  std::deque<double> vn3s_;
  std::int64_t t_ = 0;
  int run_ = 0;
  bool tripped_ = false;
};

/// Adaptive scheme: KAF ratio tracking feeding the operate/restraint test.
class A64G2 {
 public:
  explicit A64G2(DetectorConfig cfg);

  const TraceRow& step(const HarmonicFrame& frame);
  [[nodiscard]] const SchemeTrace& trace() const { return trace_; }
  [[nodiscard]] const RatioKafState& kaf() const { return kaf_; }
  [[nodiscard]] const DetectorConfig& config() const { return cfg_; }

 private:
  DetectorConfig cfg_;
  RatioKafState kaf_;
  bool started_ = false;
  TripLogic logic_;
  SchemeTrace trace_;
};

/// Non-adaptive counterpart with the ratio frozen at the calibrated 64RAT.
/// The slope band rat (1 +/- beta_ng) becomes the energy threshold beta_ng^2.
class Ng64G2 {
 public:
  Ng64G2(DetectorConfig cfg, double rat, double beta_ng);

  const TraceRow& step(const HarmonicFrame& frame);
  [[nodiscard]] const SchemeTrace& trace() const { return trace_; }
  [[nodiscard]] double rat() const { return rat_; }
  [[nodiscard]] double beta_ng() const { return beta_ng_; }

 private:
  DetectorConfig cfg_;
  double rat_;
  double beta_ng_;
  TripLogic logic_;
  SchemeTrace trace_;
};

/// Streaming entry points over caller-owned state.
void a64g2_step(A64G2& detector, const HarmonicFrame& frame);
void ng64g2_step(Ng64G2& detector, const HarmonicFrame& frame);

SchemeTrace run_a64g2(const std::vector<HarmonicFrame>& frames, const DetectorConfig& cfg);
SchemeTrace run_ng64g2(const std::vector<HarmonicFrame>& frames, const DetectorConfig& cfg, double rat,
                       double beta_ng);

struct CalibrationOptions {
  double guard = 0.2;      ///< relative inflation of the observed margin
  double min_band = 0.01;  ///< band kept when all points are collinear
};

struct Calibration {
  double rat = 0.0;
  double beta_ng = 0.0;
  double observed_margin = 0.0;
};

/// Least-squares slope through the origin and the enclosing slope band.
Calibration calibrate_64rat(std::span<const std::pair<double, double>> healthy_points,
                            const CalibrationOptions& opt = {});

}  // namespace statorguard::a64g2
