#include "statorguard/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <thread>

namespace statorguard::harness {

namespace {

/// Strict view of one JSON object: typed lookups with defaults, and a final
/// check that every key present was understood.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  /// Present, non-null value or nullptr.
  const json* opt(const std::string& key) {
    seen_.insert(key);
    return has(key) ? &j_.at(key) : nullptr;
  }

  double num(const std::string& key, double fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (v.is_string() && (v == "inf" || v == "infinity")) return std::numeric_limits<double>::infinity();
    if (!v.is_number()) throw ConfigError(where(key) + ": expected a number");
    return v.get<double>();
  }

  int integer(const std::string& key, int fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(where(key) + ": expected an integer");
    return v.get<int>();
  }

  std::uint64_t u64(const std::string& key, std::uint64_t fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      throw ConfigError(where(key) + ": expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(where(key) + ": expected true or false");
    return v.get<bool>();
  }

  std::string str(const std::string& key, const std::string& fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(where(key) + ": expected a string");
    return v.get<std::string>();
  }

  std::vector<double> nums(const std::string& key, const std::vector<double>& fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(where(key) + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(where(key) + ": expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  [[nodiscard]] std::string where(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(path_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

plant::MachineConfig parse_machine(const json& j) {
  Section s(j, "machine");
  plant::MachineConfig m;
  m.E3 = s.num("E3", m.E3);
  m.Cs = s.num("Cs", m.Cs);
  m.Ct = s.num("Ct", m.Ct);
  m.N = s.num("N", m.N);
  m.Rn = s.num("Rn", m.Rn);
  m.M = s.integer("M", m.M);
  m.f1 = s.num("f1", m.f1);
  const auto c = s.nums("e3_coeffs", {m.e3_coeffs[0], m.e3_coeffs[1], m.e3_coeffs[2]});
  if (c.size() != 3) throw ConfigError("machine.e3_coeffs: expected three numbers");
  m.e3_coeffs = {c[0], c[1], c[2]};
  m.tilt_pf = s.num("tilt_pf", m.tilt_pf);
  m.tilt_load = s.num("tilt_load", m.tilt_load);
  s.finish();
  return m;
}

plant::Subharmonic64SConfig parse_sub64s(const json& j) {
  Section s(j, "sub64s");
  plant::Subharmonic64SConfig c;
  c.N = s.num("N", c.N);
  c.Rn = s.num("Rn", c.Rn);
  c.Rbpf = s.num("Rbpf", c.Rbpf);
  c.Vs = s.num("Vs", c.Vs);
  c.f_inj = s.num("f_inj", c.f_inj);
  c.Rs = s.num("Rs", c.Rs);
  c.C0 = s.num("C0", c.C0);
  c.Un = s.num("Un", c.Un);
  c.f1 = s.num("f1", c.f1);
  c.unbalance = s.num("unbalance", c.unbalance);
  s.finish();
  return c;
}

plant::FaultSpec parse_fault(const json& j, const std::string& path) {
  Section s(j, path);
  plant::FaultSpec f;
  f.x = s.num("x", f.x);
  f.Rf = s.num("Rf", f.Rf);
  f.t_on = s.num("t_on", f.t_on);
  s.finish();
  return f;
}

plant::DisturbanceSpec parse_disturbance(const json& j, const std::string& path) {
  Section s(j, path);
  plant::DisturbanceSpec d;
  d.kind = plant::disturbance_kind_from_string(s.str("kind", ""));
  d.magnitude = s.num("magnitude", d.magnitude);
  d.t_on = s.num("t_on", d.t_on);
  if (const json* j_t_off = s.opt("t_off")) d.t_off = j_t_off->get<double>();
  d.ramp = s.num("ramp", d.ramp);
  s.finish();
  return d;
}

std::vector<plant::DisturbanceSpec> parse_disturbances(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + ": expected an array");
  std::vector<plant::DisturbanceSpec> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(parse_disturbance(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

plant::SpeedProfile parse_speed(const json& j) {
  if (!j.is_array()) throw ConfigError("profile.speed: expected an array of [t, speed] pairs");
  plant::SpeedProfile p;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
      throw ConfigError("profile.speed: expected [t, speed] pairs");
    p.points.emplace_back(e[0].get<double>(), e[1].get<double>());
  }
  for (std::size_t i = 1; i < p.points.size(); ++i) {
    if (p.points[i].first < p.points[i - 1].first) throw ConfigError("profile.speed: times must be non-decreasing");
  }
  for (const auto& [t, sp] : p.points) {
    if (sp < 0.0) throw ConfigError("profile.speed: speed must be non-negative");
  }
  return p;
}

Profile parse_profile(const json& j, Scheme scheme) {
  Section s(j, "profile");
  Profile p;
  if (scheme == Scheme::S64S) p.duration = 4.0;
  p.duration = s.num("duration", p.duration);
  p.fs = s.num("fs", p.fs);
  p.load_pu = s.num("load_pu", p.load_pu);
  p.pf = s.num("pf", p.pf);
  p.window_cycles = s.integer("window_cycles", p.window_cycles);
  p.online = s.boolean("online", p.online);
  if (const json* j_speed = s.opt("speed")) p.speed = parse_speed(*j_speed);
  s.finish();
  return p;
}

a64g2::DetectorConfig parse_detector(const json& j) {
  Section s(j, "detector");
  a64g2::DetectorConfig d;
  d.L = s.integer("L", d.L);
  d.beta = s.num("beta", d.beta);
  d.persistence = s.integer("persistence", d.persistence);
  d.Q = s.num("Q", d.Q);
  d.R = s.num("R", d.R);
  d.Pi0 = s.num("Pi0", d.Pi0);
  if (const json* j_rho0 = s.opt("rho0")) d.rho0 = j_rho0->get<double>();
  d.min_signal = s.num("min_signal", d.min_signal);
  s.finish();
  return d;
}

CalibrationConfig parse_calibration(const json& j) {
  Section s(j, "calibration");
  CalibrationConfig c = ScenarioConfig::default_calibration();
  if (const json* jp = s.opt("points")) {
    const auto& pts = *jp;
    if (!pts.is_array() || pts.empty()) throw ConfigError("calibration.points: expected a non-empty array");
    c.points.clear();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      Section p(pts[i], "calibration.points[" + std::to_string(i) + "]");
      plant::OperatingPoint op;
      op.load_pu = p.num("load_pu", op.load_pu);
      op.pf = p.num("pf", op.pf);
      p.finish();
      c.points.push_back(op);
    }
  }
  c.guard = s.num("guard", c.guard);
  c.min_band = s.num("min_band", c.min_band);
  c.duration = s.num("duration", c.duration);
  s.finish();
  return c;
}

a64s::PipelineConfig parse_a64s(const json& j) {
  Section s(j, "a64s");
  a64s::PipelineConfig p;
  p.window_cycles = s.integer("window_cycles", p.window_cycles);
  p.gamma = s.num("gamma", p.gamma);
  p.sigma_v2 = s.num("sigma_v2", p.sigma_v2);
  p.sigma_e12 = s.num("sigma_e12", p.sigma_e12);
  p.sigma_w2 = s.num("sigma_w2", p.sigma_w2);
  p.sigma_e22 = s.num("sigma_e22", p.sigma_e22);
  const auto th = s.nums("theta0", {p.theta0.a, p.theta0.b});
  if (th.size() != 2) throw ConfigError("a64s.theta0: expected two numbers");
  p.theta0 = {th[0], th[1]};
  const auto pi = s.nums("Pi0", {p.Pi0.xx, p.Pi0.xy, p.Pi0.yy});
  if (pi.size() != 3) throw ConfigError("a64s.Pi0: expected [xx, xy, yy]");
  p.Pi0 = {pi[0], pi[1], pi[2]};
  p.c0_init = s.num("c0_init", p.c0_init);
  p.Phi0 = s.num("Phi0", p.Phi0);
  if (const json* jd = s.opt("detect")) {
    Section d(*jd, "a64s.detect");
    p.detect.settle_s = d.num("settle_s", p.detect.settle_s);
    p.detect.baseline_window_s = d.num("baseline_window_s", p.detect.baseline_window_s);
    p.detect.drop_fraction = d.num("drop_fraction", p.detect.drop_fraction);
    p.detect.persistence_s = d.num("persistence_s", p.detect.persistence_s);
    d.finish();
  }
  s.finish();
  return p;
}

SweepGrid parse_sweep(const json& j) {
  Section s(j, "sweep");
  SweepGrid g;
  g.taps = s.nums("taps", g.taps);
  g.rfs = s.nums("rfs", g.rfs);
  g.loads = s.nums("loads", g.loads);
  g.pfs = s.nums("pfs", g.pfs);
  g.onset_index = s.integer("onset_index", static_cast<int>(g.onset_index));
  g.detect_window_s = s.num("detect_window_s", g.detect_window_s);
  g.duration = s.num("duration", g.duration);
  s.finish();
  return g;
}

std::vector<SecurityCase> parse_security(const json& j) {
  if (!j.is_array()) throw ConfigError("security: expected an array");
  std::vector<SecurityCase> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string path = "security[" + std::to_string(i) + "]";
    Section s(j[i], path);
    SecurityCase c;
    c.name = s.str("name", "case" + std::to_string(i));
    if (const json* j_disturbances = s.opt("disturbances")) c.disturbances = parse_disturbances(*j_disturbances, path + ".disturbances");
    c.load_pu = s.num("load_pu", c.load_pu);
    c.pf = s.num("pf", c.pf);
    c.duration = s.num("duration", c.duration);
    c.a64s = s.boolean("a64s", c.a64s);
    s.finish();
    out.push_back(std::move(c));
  }
  return out;
}

json disturbance_json(const plant::DisturbanceSpec& d) {
  json j{{"kind", std::string(plant::to_string(d.kind))}, {"magnitude", d.magnitude}, {"t_on", d.t_on}, {"ramp", d.ramp}};
  if (d.t_off) j["t_off"] = *d.t_off;
  return j;
}

std::int64_t to_index(double t, double fs) { return static_cast<std::int64_t>(std::llround(t * fs)); }

Verdict verdict_of(const std::string& name, const a64g2::SchemeTrace& trace, std::optional<std::int64_t> onset) {
  Verdict v;
  v.scheme = name;
  v.first_trip_index = trace.first_trip_index;
  v.tripped = trace.first_trip_index.has_value();
  if (onset) v.latency = trace.latency_from(*onset);
  v.max_margin = trace.max_margin(onset.value_or(0));
  return v;
}

}  // namespace

void SweepGrid::validate() const {
  if (taps.empty() || rfs.empty() || loads.empty() || pfs.empty()) throw ConfigError("sweep: every axis needs values");
  for (double x : taps)
    if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("sweep.taps: x must lie in [0, 1]");
  for (double r : rfs)
    if (!(r >= 0.0)) throw ConfigError("sweep.rfs: Rf must be non-negative");
  if (onset_index < 0) throw ConfigError("sweep.onset_index must be non-negative");
  if (!(detect_window_s > 0.0)) throw ConfigError("sweep.detect_window_s must be positive");
  if (!(duration > 0.0)) throw ConfigError("sweep.duration must be positive");
}

CalibrationConfig ScenarioConfig::default_calibration() {
  CalibrationConfig c;
  for (double load : {0.0, 0.25, 0.5, 0.75, 1.0}) c.points.push_back({load, 1.0, 1.0});
  for (double pf : {0.85, -0.85}) {
    for (double load : {0.0, 0.5, 1.0}) c.points.push_back({load, pf, 1.0});
  }
  return c;
}

a64s::PipelineConfig ScenarioConfig::pipeline() const {
  auto p = a64s;
  const auto base = a64s::PipelineConfig::from_circuit(sub64s, profile.fs);
  p.fs = base.fs;
  p.f_inj = base.f_inj;
  p.f1 = base.f1;
  p.N = base.N;
  p.Un = base.Un;
  p.R_N = base.R_N;
  p.full_scale = base.full_scale;
  return p;
}

ScenarioConfig config_from_json(const json& doc) {
  try {
    Section s(doc, "config");
    ScenarioConfig cfg;
    const auto scheme = s.str("scheme", "64g2");
    if (scheme == "64g2") cfg.scheme = Scheme::G64G2;
    else if (scheme == "64s") cfg.scheme = Scheme::S64S;
    else throw ConfigError("config.scheme: expected \"64g2\" or \"64s\"");

    if (const json* j_machine = s.opt("machine")) cfg.machine = parse_machine(*j_machine);
    if (const json* j_sub64s = s.opt("sub64s")) cfg.sub64s = parse_sub64s(*j_sub64s);
    if (const json* f = s.opt("fault")) {
      if (f->is_array()) {
        for (std::size_t i = 0; i < f->size(); ++i)
          cfg.faults.push_back(parse_fault((*f)[i], "fault[" + std::to_string(i) + "]"));
      } else {
        cfg.faults.push_back(parse_fault(*f, "fault"));
      }
    }
    if (const json* j_disturbances = s.opt("disturbances")) cfg.disturbances = parse_disturbances(*j_disturbances, "disturbances");
    if (const json* p = s.opt("profile")) cfg.profile = parse_profile(*p, cfg.scheme);
    else if (cfg.scheme == Scheme::S64S) cfg.profile.duration = 4.0;
    if (const json* n = s.opt("noise")) {
      if (n->is_number()) {
        cfg.noise.std = n->get<double>();
      } else {
        Section ns(*n, "noise");
        cfg.noise.std = ns.num("std", cfg.noise.std);
        cfg.noise.rel = ns.num("rel", cfg.noise.rel);
        ns.finish();
      }
    }
    cfg.seed = s.u64("seed", cfg.seed);
    if (const json* j_detector = s.opt("detector")) cfg.detector = parse_detector(*j_detector);
    if (const json* j_calibration = s.opt("calibration")) cfg.calibration = parse_calibration(*j_calibration);
    if (const json* j_a64s = s.opt("a64s")) cfg.a64s = parse_a64s(*j_a64s);
    if (const json* j_sweep = s.opt("sweep")) cfg.sweep = parse_sweep(*j_sweep);
    if (const json* j_security = s.opt("security")) cfg.security = parse_security(*j_security);
    s.opt("description");
    s.finish();

    cfg.machine.validate();
    cfg.sub64s.validate();
    for (const auto& f : cfg.faults) f.validate();
    for (const auto& d : cfg.disturbances) d.validate();
    cfg.detector.validate();
    cfg.sweep.validate();
    if (!(cfg.profile.duration > 0.0)) throw ConfigError("profile.duration must be positive");
    if (!(cfg.profile.fs > 0.0)) throw ConfigError("profile.fs must be positive");
    if (cfg.profile.window_cycles < 1) throw ConfigError("profile.window_cycles must be at least 1");
    if (cfg.noise.std < 0.0 || cfg.noise.rel < 0.0) throw ConfigError("noise must be non-negative");
    if (cfg.scheme == Scheme::G64G2 && cfg.faults.size() > 1)
      throw ConfigError("fault: the third-harmonic model takes a single fault");
    if (cfg.scheme == Scheme::S64S) {
      for (const auto& d : cfg.disturbances) {
        if (d.kind != plant::DisturbanceKind::GenStart && d.kind != plant::DisturbanceKind::GenStop)
          throw ConfigError("disturbances: " + std::string(plant::to_string(d.kind)) +
                            " acts on third-harmonic channels and does not apply to a 64s scenario");
      }
    }
    return cfg;
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return config_from_json(doc);
}

json config_to_json(const ScenarioConfig& cfg) {
  const auto& m = cfg.machine;
  const auto& c = cfg.sub64s;
  json j;
  j["scheme"] = cfg.scheme == Scheme::G64G2 ? "64g2" : "64s";
  j["machine"] = {{"E3", m.E3}, {"Cs", m.Cs}, {"Ct", m.Ct}, {"N", m.N}, {"Rn", m.Rn}, {"M", m.M}, {"f1", m.f1},
                  {"e3_coeffs", m.e3_coeffs}, {"tilt_pf", m.tilt_pf}, {"tilt_load", m.tilt_load}};
  j["sub64s"] = {{"N", c.N},   {"Rn", c.Rn}, {"Rbpf", c.Rbpf}, {"Vs", c.Vs}, {"f_inj", c.f_inj},
                 {"Rs", c.Rs}, {"C0", c.C0}, {"Un", c.Un},     {"f1", c.f1}, {"unbalance", c.unbalance}};
  j["fault"] = json::array();
  for (const auto& f : cfg.faults) {
    j["fault"].push_back({{"x", f.x}, {"Rf", std::isinf(f.Rf) ? json("inf") : json(f.Rf)}, {"t_on", f.t_on}});
  }
  j["disturbances"] = json::array();
  for (const auto& d : cfg.disturbances) j["disturbances"].push_back(disturbance_json(d));
  j["profile"] = {{"duration", cfg.profile.duration}, {"fs", cfg.profile.fs}, {"load_pu", cfg.profile.load_pu},
                  {"pf", cfg.profile.pf}, {"window_cycles", cfg.profile.window_cycles}, {"online", cfg.profile.online}};
  if (cfg.profile.speed) {
    json pts = json::array();
    for (const auto& [t, s] : cfg.profile.speed->points) pts.push_back({t, s});
    j["profile"]["speed"] = pts;
  }
  j["noise"] = {{"std", cfg.noise.std}, {"rel", cfg.noise.rel}};
  j["seed"] = cfg.seed;
  const auto& d = cfg.detector;
  j["detector"] = {{"L", d.L}, {"beta", d.beta}, {"persistence", d.persistence}, {"Q", d.Q},
                   {"R", d.R}, {"Pi0", d.Pi0}, {"min_signal", d.min_signal}};
  if (d.rho0) j["detector"]["rho0"] = *d.rho0;
  json pts = json::array();
  for (const auto& p : cfg.calibration.points) pts.push_back({{"load_pu", p.load_pu}, {"pf", p.pf}});
  j["calibration"] = {{"points", pts},
                      {"guard", cfg.calibration.guard},
                      {"min_band", cfg.calibration.min_band},
                      {"duration", cfg.calibration.duration}};
  const auto& a = cfg.a64s;
  j["a64s"] = {{"window_cycles", a.window_cycles},
               {"gamma", std::isinf(a.gamma) ? json("inf") : json(a.gamma)},
               {"sigma_v2", a.sigma_v2},
               {"sigma_e12", a.sigma_e12},
               {"sigma_w2", a.sigma_w2},
               {"sigma_e22", a.sigma_e22},
               {"theta0", {a.theta0.a, a.theta0.b}},
               {"Pi0", {a.Pi0.xx, a.Pi0.xy, a.Pi0.yy}},
               {"c0_init", a.c0_init},
               {"Phi0", a.Phi0},
               {"detect",
                {{"settle_s", a.detect.settle_s},
                 {"baseline_window_s", a.detect.baseline_window_s},
                 {"drop_fraction", a.detect.drop_fraction},
                 {"persistence_s", a.detect.persistence_s}}}};
  const auto& g = cfg.sweep;
  j["sweep"] = {{"taps", g.taps},
                {"rfs", g.rfs},
                {"loads", g.loads},
                {"pfs", g.pfs},
                {"onset_index", g.onset_index},
                {"detect_window_s", g.detect_window_s},
                {"duration", g.duration}};
  j["security"] = json::array();
  for (const auto& sc : cfg.security) {
    json ds = json::array();
    for (const auto& dd : sc.disturbances) ds.push_back(disturbance_json(dd));
    j["security"].push_back({{"name", sc.name},
                             {"disturbances", ds},
                             {"load_pu", sc.load_pu},
                             {"pf", sc.pf},
                             {"duration", sc.duration},
                             {"a64s", sc.a64s}});
  }
  return j;
}

std::vector<SecurityCase> default_security_cases() {
  using K = plant::DisturbanceKind;
  auto one = [](std::string name, K kind, double mag, double ramp, double load, double pf, double duration,
                std::optional<double> t_off = std::nullopt, bool with_64s = false) {
    SecurityCase c;
    c.name = std::move(name);
    c.disturbances.push_back({kind, mag, 0.3, t_off, ramp});
    c.load_pu = load;
    c.pf = pf;
    c.duration = duration;
    c.a64s = with_64s;
    return c;
  };
  // Rated output 5 kW: 4 kW = 0.8 pu, 3 kW = 0.6 pu.
  return {
      one("neutral_pt_12.5pct", K::NeutralPtScale, 0.875, 1.0, 1.0, 1.0, 2.0),
      one("neutral_pt_60pct", K::NeutralPtScale, 0.4, 1.0, 1.0, 1.0, 2.0),
      one("terminal_pt_60pct", K::TerminalPtScale, 0.4, 2.0, 1.0, 1.0, 3.0),
      one("load_step_4_to_3kW", K::LoadStep, 0.6, 0.5, 0.8, 1.0, 2.0),
      one("load_step_5_to_3kW", K::LoadStep, 0.6, 0.5, 1.0, 1.0, 2.0),
      one("pf_swing_full_load", K::PfSwing, -0.85, 0.5, 1.0, 0.85, 2.0),
      one("pf_swing_no_load", K::PfSwing, -0.85, 0.5, 0.0, 0.85, 2.0),
      one("gen_start", K::GenStart, 1.0, 0.0, 0.0, 1.0, 3.0, 2.3, true),
      one("gen_stop", K::GenStop, 1.0, 0.0, 0.0, 1.0, 3.0, 2.3, true),
  };
}

a64g2::Calibration calibrate(const ScenarioConfig& cfg) {
  const auto& pts = cfg.calibration.points;
  if (pts.size() < 2) throw ConfigError("calibration: need at least two operating points");
  std::vector<std::pair<double, double>> data(pts.size());
  parallel_for(pts.size(), [&](std::size_t i) {
    plant::Sim64G2Options o;
    o.duration = cfg.calibration.duration;
    o.fs = cfg.profile.fs;
    o.load_pu = pts[i].load_pu;
    o.pf = pts[i].pf;
    o.noise_std = cfg.noise.std;
    o.seed = cfg.seed + i;
    o.window_cycles = cfg.profile.window_cycles;
    const auto sim = plant::simulate_64g2_scenario(cfg.machine, {}, {}, o);
    double vp = 0.0, vn = 0.0;
    std::size_t n = 0;
    for (const auto& f : sim.frames) {
      if (!f.valid) continue;
      vp += f.V_P3;
      vn += f.V_N3;
      ++n;
    }
    if (n == 0) throw Error("calibrate: calibration record shorter than one phasor window");
    data[i] = {vp / static_cast<double>(n), vn / static_cast<double>(n)};
  });
  return a64g2::calibrate_64rat(data, {cfg.calibration.guard, cfg.calibration.min_band});
}

ScenarioResult run_64g2_on(const ScenarioConfig& cfg, const std::vector<HarmonicFrame>& frames,
                           const a64g2::Calibration& cal) {
  ScenarioResult r;
  r.scheme = Scheme::G64G2;
  r.seed = cfg.seed;
  r.calibration = cal;
  if (!cfg.faults.empty()) r.onset_index = to_index(cfg.faults.front().t_on, cfg.profile.fs);
  r.adaptive = a64g2::run_a64g2(frames, cfg.detector);
  r.fixed = a64g2::run_ng64g2(frames, cfg.detector, cal.rat, cal.beta_ng);
  r.verdicts.push_back(verdict_of("A64G2", r.adaptive, r.onset_index));
  r.verdicts.push_back(verdict_of("64G2", r.fixed, r.onset_index));
  return r;
}

ScenarioResult run_64s_on(const ScenarioConfig& cfg, const signal::TimeSeries& v_n, const signal::TimeSeries& i_n) {
  ScenarioResult r;
  r.scheme = Scheme::S64S;
  r.seed = cfg.seed;
  if (!cfg.faults.empty()) {
    double first = cfg.faults.front().t_on;
    for (const auto& f : cfg.faults) first = std::min(first, f.t_on);
    r.onset_index = to_index(first, cfg.profile.fs);
  }
  auto pc = cfg.pipeline();
  pc.fs = v_n.fs;
  r.s_trace = a64s::run_pipeline(v_n, i_n, pc);

  Verdict v;
  v.scheme = "A64S";
  for (const auto& row : r.s_trace) {
    if (row.trip) {
      v.first_trip_index = row.t_index;
      break;
    }
  }
  v.tripped = v.first_trip_index.has_value();
  if (r.onset_index && v.first_trip_index && *v.first_trip_index >= *r.onset_index)
    v.latency = *v.first_trip_index - *r.onset_index;
  r.verdicts.push_back(v);

  if (!r.s_trace.empty()) {
    const auto& last = r.s_trace.back();
    r.location = a64s::locate_fault(last.v_n60, pc.Un, pc.R_N, last.rs_hat, last.c0_hat * last.rs_hat, last.trip,
                                    pc.f1);
    const auto tail = static_cast<std::size_t>(std::max<std::int64_t>(1, to_index(0.25, v_n.fs)));
    const std::size_t from = r.s_trace.size() > tail ? r.s_trace.size() - tail : 0;
    double sum = 0.0;
    for (std::size_t i = from; i < r.s_trace.size(); ++i) sum += r.s_trace[i].rs_hat;
    r.rs_final = sum / static_cast<double>(r.s_trace.size() - from);
  }
  return r;
}

ScenarioResult run_scenario(const ScenarioConfig& cfg, const a64g2::Calibration& cal) {
  if (cfg.scheme == Scheme::G64G2) {
    plant::Sim64G2Options o;
    o.duration = cfg.profile.duration;
    o.fs = cfg.profile.fs;
    o.load_pu = cfg.profile.load_pu;
    o.pf = cfg.profile.pf;
    o.noise_std = cfg.noise.std;
    o.seed = cfg.seed;
    o.window_cycles = cfg.profile.window_cycles;
    auto sim = plant::simulate_64g2_scenario(cfg.machine, cfg.faults, cfg.disturbances, o);
    auto r = run_64g2_on(cfg, sim.frames, cal);
    r.g2 = std::move(sim);
    return r;
  }
  plant::Sim64SOptions o;
  o.duration = cfg.profile.duration;
  o.fs = cfg.profile.fs;
  o.noise_rel = cfg.noise.rel;
  o.seed = cfg.seed;
  o.online = cfg.profile.online;
  o.speed = cfg.profile.speed;
  auto sim = plant::simulate_64s_timeseries(cfg.sub64s, cfg.faults, o);
  auto r = run_64s_on(cfg, sim.v_n, sim.i_n);
  r.s = std::move(sim);
  return r;
}

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  if (cfg.scheme == Scheme::G64G2) return run_scenario(cfg, calibrate(cfg));
  return run_scenario(cfg, a64g2::Calibration{});
}

std::vector<Interval> blind_zone_from(const std::vector<SensitivityCell>& cells) {
  if (cells.empty()) return {};
  double rf_min = cells.front().rf;
  for (const auto& c : cells) rf_min = std::min(rf_min, c.rf);
  std::set<double> taps;
  std::set<double> blind;
  for (const auto& c : cells) {
    if (c.rf != rf_min) continue;
    taps.insert(c.x);
    if (!c.detected_adaptive && !c.detected_fixed) blind.insert(c.x);
  }
  std::vector<Interval> out;
  bool open = false;
  for (double x : taps) {
    if (blind.count(x)) {
      if (!open) out.push_back({x, x});
      out.back().hi = x;
      open = true;
    } else {
      open = false;
    }
  }
  return out;
}

ReliabilityReport sweep_sensitivity(const ScenarioConfig& cfg) {
  cfg.sweep.validate();
  const auto& g = cfg.sweep;
  ReliabilityReport rep;
  rep.kind = "sensitivity";
  rep.seed = cfg.seed;
  const auto cal = calibrate(cfg);
  rep.calibration = cal;

  std::vector<SensitivityCell> cells;
  for (double x : g.taps)
    for (double rf : g.rfs)
      for (double load : g.loads)
        for (double pf : g.pfs) {
          SensitivityCell cell;
          cell.x = x;
          cell.rf = rf;
          cell.load_pu = load;
          cell.pf = pf;
          cells.push_back(cell);
        }

  const std::int64_t window = to_index(g.detect_window_s, cfg.profile.fs);
  parallel_for(cells.size(), [&](std::size_t i) {
    auto& cell = cells[i];
    ScenarioConfig c = cfg;
    c.scheme = Scheme::G64G2;
    c.disturbances.clear();
    c.faults = {{cell.x, cell.rf, static_cast<double>(g.onset_index) / cfg.profile.fs}};
    c.profile.duration = g.duration;
    c.profile.load_pu = cell.load_pu;
    c.profile.pf = cell.pf;
    const auto r = run_scenario(c, cal);
    const auto judge = [&](const a64g2::SchemeTrace& t, std::optional<std::int64_t>& latency) {
      if (t.first_trip_index && *t.first_trip_index < g.onset_index) cell.pre_onset_trip = true;
      latency = t.latency_from(g.onset_index);
      return latency.has_value() && *latency <= window;
    };
    cell.detected_adaptive = judge(r.adaptive, cell.latency_adaptive);
    cell.detected_fixed = judge(r.fixed, cell.latency_fixed);
  });
  rep.cells = std::move(cells);
  rep.blind_zone = blind_zone_from(rep.cells);
  return rep;
}

ReliabilityReport sweep_security(const ScenarioConfig& cfg) {
  ReliabilityReport rep;
  rep.kind = "security";
  rep.seed = cfg.seed;
  const auto cases = cfg.security.empty() ? default_security_cases() : cfg.security;
  const auto cal = calibrate(cfg);
  rep.calibration = cal;

  std::vector<std::vector<Misoperation>> rows(cases.size());
  parallel_for(cases.size(), [&](std::size_t i) {
    const auto& sc = cases[i];
    ScenarioConfig c = cfg;
    c.scheme = Scheme::G64G2;
    c.faults.clear();
    c.disturbances = sc.disturbances;
    c.profile.duration = sc.duration;
    c.profile.load_pu = sc.load_pu;
    c.profile.pf = sc.pf;
    const auto r = run_scenario(c, cal);
    rows[i].push_back({sc.name, "A64G2", r.adaptive.first_trip_index.has_value(), r.adaptive.max_margin()});
    rows[i].push_back({sc.name, "64G2", r.fixed.first_trip_index.has_value(), r.fixed.max_margin()});

    if (sc.a64s) {
      // The injection scheme learns its baseline first, so the speed events
      // are replayed after settle + baseline.
      const double shift = cfg.a64s.detect.settle_s + cfg.a64s.detect.baseline_window_s + 0.2;
      plant::SpeedProfile speed;
      double end = sc.duration;
      for (const auto& d : sc.disturbances) {
        if (d.kind == plant::DisturbanceKind::GenStart) {
          speed.points = {{d.t_on + shift, 0.0}, {*d.t_off + shift, 1.0}};
        } else if (d.kind == plant::DisturbanceKind::GenStop) {
          speed.points = {{d.t_on + shift, 1.0}, {*d.t_off + shift, 0.0}};
        }
        if (d.t_off) end = std::max(end, *d.t_off + 1.0);
      }
      ScenarioConfig s = cfg;
      s.scheme = Scheme::S64S;
      s.faults.clear();
      s.disturbances.clear();
      s.profile.duration = end + shift;
      s.profile.speed = speed;
      const auto rs = run_scenario(s, cal);
      rows[i].push_back({sc.name, "A64S", rs.verdicts.front().tripped, 0.0});
    }
  });
  for (auto& r : rows)
    for (auto& m : r) rep.misoperations.push_back(std::move(m));
  return rep;
}

ReliabilityReport scenario_report(const ScenarioResult& result) {
  ReliabilityReport rep;
  rep.kind = "scenario";
  rep.seed = result.seed;
  if (result.scheme == Scheme::G64G2) rep.calibration = result.calibration;
  rep.verdicts = result.verdicts;
  return rep;
}

unsigned worker_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("STATORGUARD_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const auto workers = static_cast<std::size_t>(std::min<std::size_t>(worker_count(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace statorguard::harness
