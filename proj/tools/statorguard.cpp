#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "statorguard/harness.hpp"

namespace sg = statorguard;
namespace h = statorguard::harness;

namespace {

enum Exit { kOk = 0, kConfig = 1, kRuntime = 2 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "statorguard_out";
  std::string format = "json";
};

void add_common(CLI::App* sub, Common& c, bool needs_config = true) {
  auto* opt = sub->add_option("--config", c.config, "scenario JSON");
  if (needs_config) opt->required();
  sub->add_option("--seed", c.seed, "RNG seed (overrides the config)");
  sub->add_option("--out", c.out, "output directory");
  sub->add_option("--format", c.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
}

h::ScenarioConfig load(const Common& c) {
  auto cfg = h::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

void require_scheme(const h::ScenarioConfig& cfg, h::Scheme want, const std::string& command) {
  if (cfg.scheme != want) {
    throw h::ConfigError(command + ": config scheme is " + (cfg.scheme == h::Scheme::G64G2 ? "64g2" : "64s"));
  }
}

const sg::signal::TimeSeries& channel(const std::map<std::string, sg::signal::TimeSeries>& chans,
                                      const std::string& name, const std::string& path) {
  const auto it = chans.find(name);
  if (it == chans.end()) throw h::ConfigError(path + ": missing column '" + name + "'");
  return it->second;
}

void print_verdicts(const std::vector<h::Verdict>& verdicts) {
  for (const auto& v : verdicts) {
    std::cout << v.scheme << ": " << (v.tripped ? "TRIP" : "no trip");
    if (v.first_trip_index) std::cout << " at sample " << *v.first_trip_index;
    if (v.latency) std::cout << " (latency " << *v.latency << " samples)";
    std::cout << '\n';
  }
}

void finish(const h::ReliabilityReport& rep, const Common& c, const h::ScenarioResult* result = nullptr) {
  const auto files = h::emit_report(rep, c.out, h::format_from_string(c.format), result);
  for (const auto& f : files) std::cout << "wrote " << f << '\n';
}

/// Measured waveforms for later --input replays.
void write_waveforms(const h::ScenarioResult& r, const std::string& out) {
  const auto path = (std::filesystem::path(out) / "waveforms.csv").string();
  if (r.scheme == h::Scheme::G64G2) {
    sg::signal::write_csv(path, {"v_n", "v_p"}, {&r.g2.v_n, &r.g2.v_p});
  } else {
    sg::signal::write_csv(path, {"v_n", "i_n"}, {&r.s.v_n, &r.s.i_n});
  }
  std::cout << "wrote " << path << '\n';
}

h::ScenarioResult detect_64s(const h::ScenarioConfig& cfg, const std::string& input) {
  if (input.empty()) return h::run_scenario(cfg);
  const auto chans = sg::signal::ingest_csv(input);
  return h::run_64s_on(cfg, channel(chans, "v_n", input), channel(chans, "i_n", input));
}

void write_location(const h::ScenarioResult& r, const std::string& out) {
  h::json j;
  const auto loc = r.location.value_or(sg::a64s::LocateResult{});
  j["x_hat"] = loc.x;
  j["status"] = loc.status == sg::a64s::LocateStatus::Ok        ? "ok"
                : loc.status == sg::a64s::LocateStatus::NoFault ? "no_fault"
                                                                : "inconsistent";
  j["rs_final_ohm"] = r.rs_final;
  std::filesystem::create_directories(out);
  const auto path = (std::filesystem::path(out) / "location.json").string();
  std::ofstream f(path);
  if (!f) throw sg::Error("cannot write " + path);
  f << j.dump(2) << '\n';
  std::cout << "x_hat " << loc.x << " (" << j["status"].get<std::string>() << ")\n"
            << "wrote " << path << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stator ground-fault protection simulator and detectors"};
  app.require_subcommand(1);

  Common c;
  std::string input;
  bool adaptive_only = false;
  bool fixed_only = false;

  auto* simulate = app.add_subcommand("simulate", "simulate a scenario and run its scheme(s)");
  add_common(simulate, c);

  auto* d64g2 = app.add_subcommand("detect-64g2", "run A64G2 and the fixed 64G2");
  add_common(d64g2, c);
  d64g2->add_option("--input", input, "CSV with t,v_n,v_p third-harmonic waveforms");
  auto* a_flag = d64g2->add_flag("--adaptive", adaptive_only, "adaptive scheme only");
  d64g2->add_flag("--fixed", fixed_only, "fixed scheme only")->excludes(a_flag);

  auto* d64s = app.add_subcommand("detect-64s", "run the injection-based A64S chain");
  add_common(d64s, c);
  d64s->add_option("--input", input, "CSV with t,v_n,i_n secondary samples");

  auto* locate = app.add_subcommand("locate", "locate a fault from recorded injection channels");
  add_common(locate, c);
  locate->add_option("--input", input, "CSV with t,v_n,i_n secondary samples")->required();

  auto* calib = app.add_subcommand("calibrate", "64RAT calibration from healthy runs");
  add_common(calib, c);

  auto* sens = app.add_subcommand("sweep-sensitivity", "tap x Rf x load sensitivity sweep");
  add_common(sens, c);

  auto* sec = app.add_subcommand("sweep-security", "disturbance catalog without faults");
  add_common(sec, c);

  auto* report = app.add_subcommand("report", "re-emit a saved report.json");
  add_common(report, c, false);
  report->add_option("--input", input, "report.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }

  try {
    if (*simulate) {
      const auto cfg = load(c);
      const auto r = h::run_scenario(cfg);
      print_verdicts(r.verdicts);
      finish(h::scenario_report(r), c, &r);
      write_waveforms(r, c.out);
    } else if (*d64g2) {
      const auto cfg = load(c);
      require_scheme(cfg, h::Scheme::G64G2, "detect-64g2");
      h::ScenarioResult r;
      if (input.empty()) {
        r = h::run_scenario(cfg);
      } else {
        const auto chans = sg::signal::ingest_csv(input);
        const auto& vn = channel(chans, "v_n", input);
        const auto frames = sg::plant::harmonic_frames(vn, channel(chans, "v_p", input), 3.0 * cfg.machine.f1,
                                                       cfg.profile.window_cycles, nullptr);
        r = h::run_64g2_on(cfg, frames, h::calibrate(cfg));
        r.g2.v_n = vn;
      }
      auto rep = h::scenario_report(r);
      if (adaptive_only || fixed_only) {
        std::erase_if(rep.verdicts, [&](const h::Verdict& v) { return (v.scheme == "A64G2") != adaptive_only; });
      }
      print_verdicts(rep.verdicts);
      finish(rep, c, &r);
    } else if (*d64s) {
      const auto cfg = load(c);
      require_scheme(cfg, h::Scheme::S64S, "detect-64s");
      const auto r = detect_64s(cfg, input);
      print_verdicts(r.verdicts);
      finish(h::scenario_report(r), c, &r);
    } else if (*locate) {
      const auto cfg = load(c);
      require_scheme(cfg, h::Scheme::S64S, "locate");
      const auto r = detect_64s(cfg, input);
      print_verdicts(r.verdicts);
      finish(h::scenario_report(r), c, &r);
      write_location(r, c.out);
    } else if (*calib) {
      const auto cfg = load(c);
      require_scheme(cfg, h::Scheme::G64G2, "calibrate");
      h::ReliabilityReport rep;
      rep.kind = "calibration";
      rep.seed = cfg.seed;
      rep.calibration = h::calibrate(cfg);
      std::cout << "rat " << rep.calibration->rat << " beta_ng " << rep.calibration->beta_ng << '\n';
      finish(rep, c);
    } else if (*sens) {
      const auto cfg = load(c);
      require_scheme(cfg, h::Scheme::G64G2, "sweep-sensitivity");
      const auto rep = h::sweep_sensitivity(cfg);
      for (const auto& b : rep.blind_zone) std::cout << "blind zone [" << b.lo << ", " << b.hi << "]\n";
      if (rep.blind_zone.empty()) std::cout << "no blind zone\n";
      finish(rep, c);
    } else if (*sec) {
      const auto cfg = load(c);
      require_scheme(cfg, h::Scheme::G64G2, "sweep-security");
      const auto rep = h::sweep_security(cfg);
      for (const auto& m : rep.misoperations) {
        if (m.tripped) std::cout << "misoperation: " << m.scheme << " on " << m.scenario << '\n';
      }
      finish(rep, c);
    } else if (*report) {
      std::ifstream in(input);
      if (!in) throw h::ConfigError("cannot open " + input);
      h::json doc;
      try {
        doc = h::json::parse(in);
      } catch (const h::json::parse_error& e) {
        throw h::ConfigError(input + ": " + e.what());
      }
      const auto rep = h::report_from_json(doc);
      if (doc.contains("hash") && doc.at("hash") != h::report_hash(rep)) {
        throw sg::Error(input + ": hash does not match contents");
      }
      std::cout << rep.kind << " report, hash " << h::report_hash(rep) << '\n';
      finish(rep, c);
    }
  } catch (const h::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}
