#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "statorguard/harness.hpp"

namespace statorguard::harness {

namespace {

json opt_json(const std::optional<std::int64_t>& v) { return v ? json(*v) : json(nullptr); }

std::optional<std::int64_t> opt_index(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::int64_t>();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << std::setprecision(10);
  return out;
}

std::string csv_opt(const std::optional<std::int64_t>& v) { return v ? std::to_string(*v) : ""; }

}  // namespace

json report_to_json(const ReliabilityReport& report) {
  json j;
  j["kind"] = report.kind;
  j["seed"] = report.seed;
  if (report.calibration) {
    j["calibration"] = {{"rat", report.calibration->rat},
                        {"beta_ng", report.calibration->beta_ng},
                        {"observed_margin", report.calibration->observed_margin}};
  } else {
    j["calibration"] = nullptr;
  }
  j["cells"] = json::array();
  for (const auto& c : report.cells) {
    j["cells"].push_back({{"x", c.x},
                          {"rf", c.rf},
                          {"load_pu", c.load_pu},
                          {"pf", c.pf},
                          {"detected_adaptive", c.detected_adaptive},
                          {"detected_fixed", c.detected_fixed},
                          {"latency_adaptive", opt_json(c.latency_adaptive)},
                          {"latency_fixed", opt_json(c.latency_fixed)},
                          {"pre_onset_trip", c.pre_onset_trip}});
  }
  j["blind_zone"] = json::array();
  for (const auto& b : report.blind_zone) j["blind_zone"].push_back({{"lo", b.lo}, {"hi", b.hi}});
  j["misoperations"] = json::array();
  for (const auto& m : report.misoperations) {
    j["misoperations"].push_back(
        {{"scenario", m.scenario}, {"scheme", m.scheme}, {"tripped", m.tripped}, {"max_margin", m.max_margin}});
  }
  j["verdicts"] = json::array();
  for (const auto& v : report.verdicts) {
    j["verdicts"].push_back({{"scheme", v.scheme},
                             {"tripped", v.tripped},
                             {"first_trip_index", opt_json(v.first_trip_index)},
                             {"latency", opt_json(v.latency)},
                             {"max_margin", v.max_margin}});
  }
  return j;
}

ReliabilityReport report_from_json(const json& doc) {
  try {
    ReliabilityReport r;
    r.kind = doc.at("kind").get<std::string>();
    r.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("calibration") && !doc.at("calibration").is_null()) {
      const auto& c = doc.at("calibration");
      r.calibration = a64g2::Calibration{c.at("rat").get<double>(), c.at("beta_ng").get<double>(),
                                         c.at("observed_margin").get<double>()};
    }
    for (const auto& c : doc.at("cells")) {
      SensitivityCell cell;
      cell.x = c.at("x").get<double>();
      cell.rf = c.at("rf").get<double>();
      cell.load_pu = c.at("load_pu").get<double>();
      cell.pf = c.at("pf").get<double>();
      cell.detected_adaptive = c.at("detected_adaptive").get<bool>();
      cell.detected_fixed = c.at("detected_fixed").get<bool>();
      cell.latency_adaptive = opt_index(c, "latency_adaptive");
      cell.latency_fixed = opt_index(c, "latency_fixed");
      cell.pre_onset_trip = c.at("pre_onset_trip").get<bool>();
      r.cells.push_back(cell);
    }
    for (const auto& b : doc.at("blind_zone")) r.blind_zone.push_back({b.at("lo").get<double>(), b.at("hi").get<double>()});
    for (const auto& m : doc.at("misoperations")) {
      r.misoperations.push_back({m.at("scenario").get<std::string>(), m.at("scheme").get<std::string>(),
                                 m.at("tripped").get<bool>(), m.at("max_margin").get<double>()});
    }
    for (const auto& v : doc.at("verdicts")) {
      Verdict verdict;
      verdict.scheme = v.at("scheme").get<std::string>();
      verdict.tripped = v.at("tripped").get<bool>();
      verdict.first_trip_index = opt_index(v, "first_trip_index");
      verdict.latency = opt_index(v, "latency");
      verdict.max_margin = v.at("max_margin").get<double>();
      r.verdicts.push_back(verdict);
    }
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("report: ") + e.what());
  }
}

std::string report_hash(const ReliabilityReport& report) {
  const std::string text = report_to_json(report).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Format format_from_string(const std::string& s) {
  if (s == "json") return Format::Json;
  if (s == "csv") return Format::Csv;
  throw ConfigError("--format must be json or csv");
}

void write_g2_trace_csv(const std::string& path, const a64g2::SchemeTrace& trace, double fs) {
  auto out = open_out(path);
  out << "t,VP3,VN3,rho_hat,residual,JAO,JAR,trip\n";
  for (const auto& r : trace.rows) {
    out << static_cast<double>(r.t_index) / fs << ',' << r.V_P3 << ',' << r.V_N3 << ',' << r.rho_hat << ','
        << r.residual << ',' << r.J_AO << ',' << r.J_AR << ',' << (r.trip ? 1 : 0) << '\n';
  }
}

void write_s_trace_csv(const std::string& path, const std::vector<a64s::TraceRow>& trace) {
  auto out = open_out(path);
  out << "t,vn,in,a0_hat,kd_hat,tau0_hat_ms,rs_hat_ohm,c0_hat_uF,x_hat,trip\n";
  for (const auto& r : trace) {
    out << r.t << ',' << r.v_n << ',' << r.i_n << ',' << r.a0_hat << ',' << r.kd_hat << ',' << r.tau0_hat * 1e3 << ','
        << r.rs_hat << ',' << r.c0_hat * 1e6 << ',' << r.x_hat << ',' << (r.trip ? 1 : 0) << '\n';
  }
}

void write_long_csv(const std::string& path, const ScenarioResult& result, double fs) {
  auto out = open_out(path);
  out << "t,signal,value\n";
  if (result.scheme == Scheme::G64G2) {
    const auto& a = result.adaptive.rows;
    const auto& f = result.fixed.rows;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double t = static_cast<double>(a[i].t_index) / fs;
      out << t << ",VP3," << a[i].V_P3 << '\n';
      out << t << ",VN3," << a[i].V_N3 << '\n';
      out << t << ",rho_hat," << a[i].rho_hat << '\n';
      out << t << ",margin_adaptive," << a[i].margin << '\n';
      out << t << ",trip_adaptive," << (a[i].trip ? 1 : 0) << '\n';
      if (i < f.size()) {
        out << t << ",margin_fixed," << f[i].margin << '\n';
        out << t << ",trip_fixed," << (f[i].trip ? 1 : 0) << '\n';
      }
    }
  } else {
    for (const auto& r : result.s_trace) {
      out << r.t << ",vn," << r.v_n << '\n';
      out << r.t << ",in," << r.i_n << '\n';
      out << r.t << ",rs_hat_ohm," << r.rs_hat << '\n';
      out << r.t << ",tau0_hat_ms," << r.tau0_hat * 1e3 << '\n';
      out << r.t << ",c0_hat_uF," << r.c0_hat * 1e6 << '\n';
      out << r.t << ",x_hat," << r.x_hat << '\n';
      out << r.t << ",trip," << (r.trip ? 1 : 0) << '\n';
    }
  }
}

std::vector<std::string> emit_report(const ReliabilityReport& report, const std::string& out_dir, Format format,
                                     const ScenarioResult* result) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw Error("cannot create output directory " + out_dir);
  std::vector<std::string> written;
  const auto path = [&](const char* name) { return (fs::path(out_dir) / name).string(); };

  json doc = report_to_json(report);
  doc["hash"] = report_hash(report);
  {
    const auto p = path("report.json");
    auto out = open_out(p);
    out << doc.dump(2) << '\n';
    if (!out) throw Error("cannot write " + p);
    written.push_back(p);
  }

  if (format == Format::Csv) {
    if (!report.cells.empty()) {
      const auto p = path("cells.csv");
      auto out = open_out(p);
      out << "x,rf,load_pu,pf,detected_adaptive,detected_fixed,latency_adaptive,latency_fixed\n";
      for (const auto& c : report.cells) {
        out << c.x << ',' << c.rf << ',' << c.load_pu << ',' << c.pf << ',' << c.detected_adaptive << ','
            << c.detected_fixed << ',' << csv_opt(c.latency_adaptive) << ',' << csv_opt(c.latency_fixed) << '\n';
      }
      written.push_back(p);
    }
    if (!report.misoperations.empty()) {
      const auto p = path("misoperations.csv");
      auto out = open_out(p);
      out << "scenario,scheme,tripped,max_margin\n";
      for (const auto& m : report.misoperations)
        out << m.scenario << ',' << m.scheme << ',' << m.tripped << ',' << m.max_margin << '\n';
      written.push_back(p);
    }
    if (!report.verdicts.empty()) {
      const auto p = path("verdicts.csv");
      auto out = open_out(p);
      out << "scheme,tripped,first_trip_index,latency,max_margin\n";
      for (const auto& v : report.verdicts) {
        out << v.scheme << ',' << v.tripped << ',' << csv_opt(v.first_trip_index) << ',' << csv_opt(v.latency) << ','
            << v.max_margin << '\n';
      }
      written.push_back(p);
    }
  }

  if (result) {
    if (result->scheme == Scheme::G64G2) {
      const double fs = result->g2.v_n.fs;
      write_g2_trace_csv(path("trace_a64g2.csv"), result->adaptive, fs);
      write_g2_trace_csv(path("trace_64g2.csv"), result->fixed, fs);
      written.push_back(path("trace_a64g2.csv"));
      written.push_back(path("trace_64g2.csv"));
      write_long_csv(path("long.csv"), *result, fs);
    } else {
      write_s_trace_csv(path("trace_a64s.csv"), result->s_trace);
      written.push_back(path("trace_a64s.csv"));
      write_long_csv(path("long.csv"), *result, 1.0);
    }
    written.push_back(path("long.csv"));
  }
  return written;
}

}  // namespace statorguard::harness
