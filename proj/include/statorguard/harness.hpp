#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "statorguard/a64g2.hpp"
#include "statorguard/a64s.hpp"
#include "statorguard/plant.hpp"

namespace statorguard::harness {

using nlohmann::json;

/// Schema or value problem in a scenario document (CLI exit code 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class Scheme { G64G2, S64S };

struct Profile {
  double duration = 0.8;  ///< s
  double fs = 1000.0;
  double load_pu = 1.0;
  double pf = 1.0;
  int window_cycles = 3;  ///< 64G2 phasor window, cycles of 3 f1
  bool online = true;     ///< 64S: machine excited
  std::optional<plant::SpeedProfile> speed;
};

struct Noise {
  double std = 0.01;  ///< 64G2 waveform noise, volts
  double rel = 0.0;   ///< 64S noise relative to each channel's healthy peak
};

struct CalibrationConfig {
  std::vector<plant::OperatingPoint> points;  ///< healthy operating points
  double guard = 0.2;
  double min_band = 0.01;
  double duration = 0.3;  ///< s of healthy record per point
};

struct SweepGrid {
  std::vector<double> taps{0.0, 0.03, 0.06, 0.09, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0};
  std::vector<double> rfs{50.0};
  std::vector<double> loads{0.5, 1.0};
  std::vector<double> pfs{1.0};
  std::int64_t onset_index = 270;
  double detect_window_s = 0.5;
  double duration = 0.8;

  void validate() const;
};

struct SecurityCase {
  std::string name;
  std::vector<plant::DisturbanceSpec> disturbances;
  double load_pu = 1.0;
  double pf = 1.0;
  double duration = 3.0;
  bool a64s = false;  ///< also run the injection scheme through the speed ramps
};

struct ScenarioConfig {
  Scheme scheme = Scheme::G64G2;
  plant::MachineConfig machine;
  plant::Subharmonic64SConfig sub64s;
  std::vector<plant::FaultSpec> faults;
  std::vector<plant::DisturbanceSpec> disturbances;
  Profile profile;
  Noise noise;
  std::uint64_t seed = 0;
  a64g2::DetectorConfig detector;
  CalibrationConfig calibration = default_calibration();
  a64s::PipelineConfig a64s;  ///< circuit-derived fields are filled from sub64s
  SweepGrid sweep;
  std::vector<SecurityCase> security;

  static CalibrationConfig default_calibration();
  /// Pipeline settings with the circuit fields taken from sub64s/profile.
  [[nodiscard]] a64s::PipelineConfig pipeline() const;
};

ScenarioConfig config_from_json(const json& doc);
ScenarioConfig load_config(const std::string& path);
json config_to_json(const ScenarioConfig& cfg);

/// Default security catalog: neutral PT 12.5% / 60%, terminal PT 60%, load
/// steps, pf swings at full and no load, start and stop.
std::vector<SecurityCase> default_security_cases();

/// Healthy-run 64RAT calibration over cfg.calibration.points.
a64g2::Calibration calibrate(const ScenarioConfig& cfg);

struct Verdict {
  std::string scheme;  ///< "A64G2", "64G2", "A64S"
  bool tripped = false;
  std::optional<std::int64_t> first_trip_index;
  std::optional<std::int64_t> latency;  ///< samples from fault onset
  double max_margin = 0.0;              ///< 64G2 variants only
};

struct ScenarioResult {
  Scheme scheme = Scheme::G64G2;
  std::uint64_t seed = 0;
  std::optional<std::int64_t> onset_index;
  // 64G2
  plant::Sim64G2Result g2;
  a64g2::SchemeTrace adaptive;
  a64g2::SchemeTrace fixed;
  a64g2::Calibration calibration;
  // 64S
  plant::Sim64SResult s;
  std::vector<a64s::TraceRow> s_trace;
  std::optional<a64s::LocateResult> location;  ///< final locator output
  double rs_final = 0.0;                       ///< mean rs_hat over the last 0.25 s

  std::vector<Verdict> verdicts;
};

ScenarioResult run_scenario(const ScenarioConfig& cfg);
/// Same as run_scenario with a precomputed calibration (sweeps reuse it).
ScenarioResult run_scenario(const ScenarioConfig& cfg, const a64g2::Calibration& cal);
/// A64S chain on measured secondary channels.
ScenarioResult run_64s_on(const ScenarioConfig& cfg, const signal::TimeSeries& v_n, const signal::TimeSeries& i_n);
/// 64G2 schemes on measured frames.
ScenarioResult run_64g2_on(const ScenarioConfig& cfg, const std::vector<HarmonicFrame>& frames,
                           const a64g2::Calibration& cal);

struct SensitivityCell {
  double x = 0.0;
  double rf = 0.0;
  double load_pu = 1.0;
  double pf = 1.0;
  bool detected_adaptive = false;
  bool detected_fixed = false;
  std::optional<std::int64_t> latency_adaptive;
  std::optional<std::int64_t> latency_fixed;
  bool pre_onset_trip = false;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct Misoperation {
  std::string scenario;
  std::string scheme;
  bool tripped = false;
  double max_margin = 0.0;
};

struct ReliabilityReport {
  std::string kind;  ///< "sensitivity", "security", "scenario", "calibration" or "" (empty)
  std::uint64_t seed = 0;
  std::optional<a64g2::Calibration> calibration;
  std::vector<SensitivityCell> cells;
  std::vector<Interval> blind_zone;
  std::vector<Misoperation> misoperations;
  std::vector<Verdict> verdicts;
};

/// Taps at which neither scheme detects at the smallest Rf for some operating
/// point, grouped into maximal runs of adjacent grid taps.
std::vector<Interval> blind_zone_from(const std::vector<SensitivityCell>& cells);

ReliabilityReport sweep_sensitivity(const ScenarioConfig& cfg);
ReliabilityReport sweep_security(const ScenarioConfig& cfg);
ReliabilityReport scenario_report(const ScenarioResult& result);

/// Worker count: hardware concurrency capped by STATORGUARD_THREADS.
unsigned worker_count();
/// Runs body(i) for i in [0, n) on the worker pool. Exceptions propagate.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

json report_to_json(const ReliabilityReport& report);
ReliabilityReport report_from_json(const json& doc);
/// FNV-1a 64 of the canonical JSON dump without the hash field.
std::string report_hash(const ReliabilityReport& report);

enum class Format { Json, Csv };
Format format_from_string(const std::string& s);

/// Writes report.json (always), verdict CSV rows when format is CSV, and for
/// scenario results the per-trace CSVs plus a long-format CSV.
/// Returns the written paths.
std::vector<std::string> emit_report(const ReliabilityReport& report, const std::string& out_dir, Format format,
                                     const ScenarioResult* result = nullptr);

void write_g2_trace_csv(const std::string& path, const a64g2::SchemeTrace& trace, double fs);
void write_s_trace_csv(const std::string& path, const std::vector<a64s::TraceRow>& trace);
void write_long_csv(const std::string& path, const ScenarioResult& result, double fs);

}  // namespace statorguard::harness
