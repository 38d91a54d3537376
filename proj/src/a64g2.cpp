#include "statorguard/a64g2.hpp"

#include <algorithm>
#include <cmath>

#include "statorguard/signal.hpp"

namespace statorguard::a64g2 {

KafStep kaf_update(const RatioKafState& state, double V_P3, double V_N3) {
  KafStep out;
  out.state = state;
  auto& s = out.state;
  s.P = state.P * state.R / (state.R + state.P * V_P3 * V_P3) + state.Q;
  out.gain = s.P * V_P3 / state.R;
  out.residual = V_N3 - V_P3 * state.rho_hat;
  s.rho_hat = state.rho_hat + out.gain * out.residual;
  s.t = state.t + 1;
  return out;
}

void DetectorConfig::validate() const {
  if (L < 2) throw Error("detector.L must be at least 2");
  if (!(beta > 0.0)) throw Error("detector.beta must be positive");
  if (persistence < 1) throw Error("detector.persistence must be at least 1");
  if (Q < 0.0) throw Error("detector.Q must be non-negative");
  if (!(R > 0.0)) throw Error("detector.R must be positive");
  if (!(Pi0 > 0.0)) throw Error("detector.Pi0 must be positive");
  if (min_signal < 0.0) throw Error("detector.min_signal must be non-negative");
}

OperateRestraint operate_restraint(std::span<const double> residuals, std::span<const double> vn3s,
                                   const DetectorConfig& cfg, std::int64_t t) {
  const auto width = static_cast<std::size_t>(std::min<std::int64_t>(t, cfg.L + 1));
  OperateRestraint out;
  if (width > vn3s.size()) throw Error("operate_restraint: restraint window too short");
  for (std::size_t i = vn3s.size() - width; i < vn3s.size(); ++i) out.J_AR += vn3s[i] * vn3s[i];
  if (t > cfg.L) {
    if (width > residuals.size()) throw Error("operate_restraint: operate window too short");
    for (std::size_t i = residuals.size() - width; i < residuals.size(); ++i) out.J_AO += residuals[i] * residuals[i];
  }
  return out;
}

std::optional<std::int64_t> SchemeTrace::latency_from(std::int64_t onset_index) const {
  if (!first_trip_index || *first_trip_index < onset_index) return std::nullopt;
  return *first_trip_index - onset_index;
}

double SchemeTrace::max_margin(std::int64_t from_index) const {
  double m = 0.0;
  for (const auto& r : rows) {
    if (r.t_index >= from_index && r.active) m = std::max(m, r.margin);
  }
  return m;
}

TripLogic::TripLogic(const DetectorConfig& cfg, double threshold) : cfg_(cfg), threshold_(threshold) {
  cfg_.validate();
}

OperateRestraint TripLogic::push(double residual, double vn3, bool& inequality) {
  ++t_;
  residuals_.push_back(residual);
  vn3s_.push_back(vn3);
  const auto keep = static_cast<std::size_t>(cfg_.L + 1);
  while (residuals_.size() > keep) residuals_.pop_front();
  while (vn3s_.size() > keep) vn3s_.pop_front();

  const std::vector<double> res(residuals_.begin(), residuals_.end());
  const std::vector<double> vns(vn3s_.begin(), vn3s_.end());
  const auto jr = operate_restraint(res, vns, cfg_, t_);
  inequality = jr.J_AO > threshold_ * jr.J_AR;
  run_ = inequality ? run_ + 1 : 0;
  if (run_ >= cfg_.persistence) tripped_ = true;
  return jr;
}

namespace {

bool accepted(const HarmonicFrame& f, const DetectorConfig& cfg) {
  return f.valid && (f.V_P3 + f.V_N3) >= cfg.min_signal;
}

void record(SchemeTrace& trace, TraceRow row) {
  if (row.trip && !trace.first_trip_index) trace.first_trip_index = row.t_index;
  trace.rows.push_back(row);
}

}  // namespace

A64G2::A64G2(DetectorConfig cfg) : cfg_(cfg), logic_(cfg, cfg.beta) {
  kaf_.Q = cfg_.Q;
  kaf_.R = cfg_.R;
  kaf_.Pi0 = cfg_.Pi0;
  kaf_.P = cfg_.Pi0;
}

const TraceRow& A64G2::step(const HarmonicFrame& frame) {
  TraceRow row;
  row.t_index = frame.t_index;
  row.V_P3 = frame.V_P3;
  row.V_N3 = frame.V_N3;
  row.rho_hat = kaf_.rho_hat;
  row.trip = logic_.tripped();
  if (accepted(frame, cfg_)) {
    if (!started_) {
      if (cfg_.rho0) {
        kaf_.rho_hat = *cfg_.rho0;
      } else {
        kaf_.rho_hat = frame.V_P3 > 0.0 ? frame.V_N3 / frame.V_P3 : 0.5;
      }
      started_ = true;
    }
    const auto step = kaf_update(kaf_, frame.V_P3, frame.V_N3);
    kaf_ = step.state;
    bool inequality = false;
    const auto jr = logic_.push(step.residual, frame.V_N3, inequality);
    row.active = true;
    row.rho_hat = kaf_.rho_hat;
    row.residual = step.residual;
    row.J_AO = jr.J_AO;
    row.J_AR = jr.J_AR;
    row.margin = jr.J_AR > 0.0 ? jr.J_AO / (cfg_.beta * jr.J_AR) : 0.0;
    row.trip = logic_.tripped();
  }
  record(trace_, row);
  return trace_.rows.back();
}

Ng64G2::Ng64G2(DetectorConfig cfg, double rat, double beta_ng)
    : cfg_(cfg), rat_(rat), beta_ng_(beta_ng), logic_(cfg, beta_ng * beta_ng) {
  if (!(beta_ng > 0.0)) throw Error("Ng64G2: beta_ng must be positive");
}

const TraceRow& Ng64G2::step(const HarmonicFrame& frame) {
  TraceRow row;
  row.t_index = frame.t_index;
  row.V_P3 = frame.V_P3;
  row.V_N3 = frame.V_N3;
  row.rho_hat = rat_;
  row.trip = logic_.tripped();
  if (accepted(frame, cfg_)) {
    const double residual = frame.V_N3 - rat_ * frame.V_P3;
    bool inequality = false;
    const auto jr = logic_.push(residual, frame.V_N3, inequality);
    row.active = true;
    row.residual = residual;
    row.J_AO = jr.J_AO;
    row.J_AR = jr.J_AR;
    row.margin = jr.J_AR > 0.0 ? jr.J_AO / (logic_.threshold() * jr.J_AR) : 0.0;
    row.trip = logic_.tripped();
  }
  record(trace_, row);
  return trace_.rows.back();
}

void a64g2_step(A64G2& detector, const HarmonicFrame& frame) { detector.step(frame); }
void ng64g2_step(Ng64G2& detector, const HarmonicFrame& frame) { detector.step(frame); }

SchemeTrace run_a64g2(const std::vector<HarmonicFrame>& frames, const DetectorConfig& cfg) {
  A64G2 det(cfg);
  for (const auto& f : frames) det.step(f);
  return det.trace();
}

SchemeTrace run_ng64g2(const std::vector<HarmonicFrame>& frames, const DetectorConfig& cfg, double rat,
                       double beta_ng) {
  Ng64G2 det(cfg, rat, beta_ng);
  for (const auto& f : frames) det.step(f);
  return det.trace();
}

Calibration calibrate_64rat(std::span<const std::pair<double, double>> healthy_points, const CalibrationOptions& opt) {
  if (healthy_points.size() < 2) throw Error("calibrate_64rat: need at least two points");
  double sxy = 0.0, sxx = 0.0;
  for (const auto& [vp, vn] : healthy_points) {
    sxy += vp * vn;
    sxx += vp * vp;
  }
  if (!(sxx > 0.0)) throw Error("calibrate_64rat: all V_P3 values are zero");
  Calibration cal;
  cal.rat = sxy / sxx;
  if (!(cal.rat > 0.0)) throw Error("calibrate_64rat: non-positive ratio");
  for (const auto& [vp, vn] : healthy_points) {
    if (vp <= 0.0) continue;
    cal.observed_margin = std::max(cal.observed_margin, std::abs(vn / (cal.rat * vp) - 1.0));
  }
  cal.beta_ng = (1.0 + opt.guard) * cal.observed_margin + opt.min_band;
  return cal;
}

}  // namespace statorguard::a64g2
