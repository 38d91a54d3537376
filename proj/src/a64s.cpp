#include "statorguard/a64s.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace statorguard::a64s {

TustinCoeffs tustin_coeffs(double K3, double tau0, double T) {
  if (!(T > 0.0) || tau0 < 0.0) throw Error("tustin_coeffs: need T > 0 and tau0 >= 0");
  const double den = T + 2.0 * tau0;
  return {K3 * T / den, (T - 2.0 * tau0) / den};
}

double tau0_from_a0(double a0, double T) { return 0.5 * T * (1.0 - a0) / (1.0 + a0); }

Regression regression_step(ThetaKafState& state, double v_n, double i_n) {
  Regression out;
  if (state.has_prev) {
    out.u = state.prev_in + i_n;
    out.phi = {-state.prev_vn, out.u};
    out.valid = true;
  }
  state.prev_vn = v_n;
  state.prev_in = i_n;
  state.has_prev = true;
  return out;
}

ThetaUpdate theta_kaf_update(const ThetaKafState& state, double v_n, const Vec2& phi) {
  ThetaUpdate out;
  out.state = state;
  const Sym2& P = state.P;
  const Vec2 Pphi = P * phi;
  const double s = state.sigma_e12 + phi.a * Pphi.a + phi.b * Pphi.b;
  // Each entry is formed independently so P stays exactly symmetric.
  Sym2 Pn{
      P.xx - Pphi.a * Pphi.a / s + state.sigma_v2,
      P.xy - Pphi.a * Pphi.b / s,
      P.yy - Pphi.b * Pphi.b / s + state.sigma_v2,
  };
  const Vec2 K = Pn * phi;
  out.innovation = v_n - (phi.a * state.theta.a + phi.b * state.theta.b);
  out.state.theta = {state.theta.a + K.a / state.sigma_e12 * out.innovation,
                     state.theta.b + K.b / state.sigma_e12 * out.innovation};
  out.state.P = Pn;
  return out;
}

LowPass::LowPass(double gamma, double T) : p_(0.0), bypass_(std::isinf(gamma)) {
  if (!(gamma > 0.0) || !(T > 0.0)) throw Error("LowPass: gamma and T must be positive");
  if (!bypass_) p_ = std::exp(-gamma * T);
}

double LowPass::push(double x) {
  if (bypass_) {
    y_ = x;
    return y_;
  }
  y_ = p_ * y_ + (1.0 - p_) * x_prev_;
  x_prev_ = x;
  return y_;
}

Extracted extract_params(ExtractorState& state, const Vec2& theta_hat) {
  const double a0 = theta_hat.a;
  const double kd = theta_hat.b;
  const double den = 1.0 + a0;
  state.degenerate = !(std::abs(den) > 1e-12) || !std::isfinite(a0);
  if (!state.degenerate) state.ratio_in = (1.0 - a0) / den;

  const double fr = state.f_ratio.push(state.ratio_in);
  state.tau0_hat = 0.5 * state.T * std::max(0.0, fr);
  const double fg = state.f_gain.push((state.T + 2.0 * state.tau0_hat) * kd);
  state.rs_hat = state.N * state.N / state.T * std::max(0.0, fg);
  return {state.tau0_hat, state.rs_hat, state.degenerate};
}

C0KafState c0_kaf_update(const C0KafState& state, double tau0_hat, double rs_hat) {
  if (rs_hat < 0.0) throw Error("c0_kaf_update: rs_hat must be non-negative");
  C0KafState out = state;
  out.Qv = state.Qv * state.sigma_e22 / (state.sigma_e22 + rs_hat * rs_hat * state.Qv) + state.sigma_w2;
  const double k = out.Qv * rs_hat / state.sigma_e22;
  out.c0_hat = state.c0_hat + k * (tau0_hat - rs_hat * state.c0_hat);
  return out;
}

namespace {
std::int64_t samples_for(double seconds, double fs) {
  return static_cast<std::int64_t>(std::llround(seconds * fs));
}
}  // namespace

RsDropDetector::RsDropDetector(DetectConfig cfg, double fs)
    : cfg_(cfg),
      settle_n_(samples_for(cfg.settle_s, fs)),
      window_n_(samples_for(cfg.baseline_window_s, fs)),
      persist_n_(std::max<std::int64_t>(1, samples_for(cfg.persistence_s, fs))) {
  if (!(fs > 0.0)) throw Error("a64s detector: fs must be positive");
  if (cfg.settle_s < 0.0) throw Error("a64s detector: settle must be non-negative");
  if (window_n_ < 1) throw Error("a64s detector: baseline window must hold at least one sample");
  if (!(cfg.drop_fraction > 0.0 && cfg.drop_fraction < 1.0))
    throw Error("a64s detector: drop_fraction must lie in (0, 1)");
  window_.reserve(static_cast<std::size_t>(window_n_));
}

bool RsDropDetector::push(std::int64_t index, double rs_hat) {
  const std::int64_t k = seen_++;
  if (k < settle_n_) return false;
  if (!baseline_ready_) {
    window_.push_back(rs_hat);
    if (static_cast<std::int64_t>(window_.size()) < window_n_) return false;
    double sum = 0.0;
    for (double r : window_) sum += r;
    baseline_ = sum / static_cast<double>(window_.size());
    if (!(baseline_ > 0.0)) throw Error("a64s detector: baseline insulation resistance is zero");
    std::int64_t run = 0;
    for (double r : window_) {
      run = r < cfg_.drop_fraction * baseline_ ? run + 1 : 0;
      if (run >= persist_n_) throw Error("a64s detector: baseline window already contains a resistance drop");
    }
    baseline_ready_ = true;
    return false;
  }
  if (trip_) return true;
  run_ = rs_hat < cfg_.drop_fraction * baseline_ ? run_ + 1 : 0;
  if (run_ >= persist_n_) trip_ = DetectEvent{index, rs_hat};
  return trip_.has_value();
}

DetectResult a64s_detect(std::span<const double> rs_hat, double fs, const DetectConfig& cfg) {
  RsDropDetector det(cfg, fs);
  for (std::size_t i = 0; i < rs_hat.size(); ++i) det.push(static_cast<std::int64_t>(i), rs_hat[i]);
  if (!det.baseline_ready()) throw Error("a64s_detect: stream shorter than settle + baseline window");
  return {det.baseline(), det.trip()};
}

LocateResult locate_fault(double v_n60, double Un, double R_N, double rs_f, double tau0_f, bool fault_active,
                          double f1) {
  if (!(Un > 0.0) || !(R_N > 0.0)) throw Error("locate_fault: Un and R_N must be positive");
  if (!fault_active) return {};
  if (v_n60 < 0.0 || rs_f < 0.0 || tau0_f < 0.0) throw Error("locate_fault: inputs must be non-negative");
  const double omega = 2.0 * std::numbers::pi * f1;
  LocateResult out;
  out.x = v_n60 / (Un * R_N) * std::hypot(R_N + rs_f, omega * R_N * tau0_f);
  out.status = out.x > 1.2 ? LocateStatus::Inconsistent : LocateStatus::Ok;
  return out;
}

PipelineConfig PipelineConfig::from_circuit(const plant::Subharmonic64SConfig& cfg, double fs) {
  PipelineConfig p;
  p.fs = fs;
  p.f_inj = cfg.f_inj;
  p.f1 = cfg.f1;
  p.N = cfg.N;
  p.Un = cfg.Un;
  p.R_N = cfg.primary_RN();
  p.full_scale = cfg.Vs * std::numbers::sqrt2;
  return p;
}

namespace {
PipelineConfig checked(PipelineConfig cfg) {
  if (!(cfg.fs > 0.0)) throw Error("a64s: fs must be positive");
  if (cfg.window_cycles < 1) throw Error("a64s: window_cycles must be at least 1");
  if (!(cfg.gamma > 0.0)) throw Error("a64s: gamma must be positive");
  if (cfg.sigma_v2 < 0.0 || cfg.sigma_w2 < 0.0) throw Error("a64s: process noise must be non-negative");
  if (cfg.sigma_e12 == 0.0) cfg.sigma_e12 = std::pow(0.01 * cfg.full_scale, 2);
  if (!(cfg.sigma_e12 > 0.0) || !(cfg.sigma_e22 > 0.0)) throw Error("a64s: measurement noise must be positive");
  if (!cfg.Pi0.positive_definite()) throw Error("a64s: Pi0 must be positive definite");
  if (!(cfg.Phi0 > 0.0)) throw Error("a64s: Phi0 must be positive");
  return cfg;
}
}  // namespace

Pipeline::Pipeline(PipelineConfig cfg)
    : cfg_(checked(cfg)),
      pv_(cfg_.fs, cfg_.f_inj, signal::window_length(cfg_.fs, cfg_.f_inj, cfg_.window_cycles)),
      pi_(cfg_.fs, cfg_.f_inj, signal::window_length(cfg_.fs, cfg_.f_inj, cfg_.window_cycles)),
      p60_(cfg_.fs, cfg_.f1, signal::window_length(cfg_.fs, cfg_.f_inj, cfg_.window_cycles)),
      extractor_(1.0 / cfg_.fs, cfg_.gamma, cfg_.N),
      detector_(cfg_.detect, cfg_.fs) {
  theta_.theta = cfg_.theta0;
  theta_.P = cfg_.Pi0;
  theta_.sigma_v2 = cfg_.sigma_v2;
  theta_.sigma_e12 = cfg_.sigma_e12;
  c0_.c0_hat = cfg_.c0_init;
  c0_.Qv = cfg_.Phi0;
  c0_.sigma_w2 = cfg_.sigma_w2;
  c0_.sigma_e22 = cfg_.sigma_e22;
}

SubharmonicFrame Pipeline::prefilter(double v_raw, double i_raw) {
  SubharmonicFrame f;
  f.t_index = n_;
  const auto fv = pv_.push(v_raw);
  pi_.push(i_raw);
  const auto f60 = p60_.push(v_raw);
  f.valid = fv.valid;
  if (f.valid) {
    f.v_n = pv_.reconstruct_last();
    f.i_n = pi_.reconstruct_last();
    f.v_n60 = f60.magnitude / std::numbers::sqrt2 * cfg_.N;
  }
  return f;
}

const TraceRow& Pipeline::push(double v_raw, double i_raw) {
  const auto frame = prefilter(v_raw, i_raw);
  TraceRow row;
  row.t_index = n_;
  row.t = static_cast<double>(n_) / cfg_.fs;
  row.v_n = frame.v_n;
  row.i_n = frame.i_n;
  row.v_n60 = frame.v_n60;
  row.valid = frame.valid;
  if (frame.valid) {
    const auto reg = regression_step(theta_, frame.v_n, frame.i_n);
    if (reg.valid) theta_ = theta_kaf_update(theta_, frame.v_n, reg.phi).state;
  }
  const auto ex = extract_params(extractor_, theta_.theta);
  c0_ = c0_kaf_update(c0_, ex.tau0_hat, ex.rs_hat);
  const bool trip = detector_.push(n_, ex.rs_hat);

  row.a0_hat = theta_.theta.a;
  row.kd_hat = theta_.theta.b;
  row.tau0_hat = ex.tau0_hat;
  row.rs_hat = ex.rs_hat;
  row.c0_hat = c0_.c0_hat;
  row.trip = trip;
  const auto loc = locate_fault(frame.v_n60, cfg_.Un, cfg_.R_N, ex.rs_hat, c0_.c0_hat * ex.rs_hat, trip, cfg_.f1);
  row.x_hat = loc.x;
  ++n_;
  trace_.push_back(row);
  return trace_.back();
}

std::vector<TraceRow> run_pipeline(const signal::TimeSeries& v_n, const signal::TimeSeries& i_n,
                                   const PipelineConfig& cfg) {
  if (v_n.size() != i_n.size()) throw Error("run_pipeline: v_n and i_n lengths differ");
  if (std::abs(v_n.fs - cfg.fs) > 1e-6 * cfg.fs || std::abs(i_n.fs - cfg.fs) > 1e-6 * cfg.fs)
    throw Error("run_pipeline: series sampling rate does not match the pipeline");
  Pipeline p(cfg);
  for (std::size_t n = 0; n < v_n.size(); ++n) p.push(v_n.samples[n], i_n.samples[n]);
  return p.trace();
}

}  // namespace statorguard::a64s
