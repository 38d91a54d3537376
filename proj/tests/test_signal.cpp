#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include <doctest.h>

#include "statorguard/signal.hpp"

using namespace statorguard;
using namespace statorguard::signal;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("statorguard_test_" + name)).string();
}

/// Rectangular one-bin DFT over samples [end - n, end), referenced to t = 0.
std::complex<double> dft_bin(const TimeSeries& ts, double f0, std::size_t end, std::size_t n) {
  std::complex<double> acc{0.0, 0.0};
  for (std::size_t k = end - n; k < end; ++k) {
    const double t = ts.time_at(k);
    acc += ts.samples[k] * std::polar(1.0, -kTwoPi * f0 * t);
  }
  return 2.0 * acc / static_cast<double>(n);
}

}  // namespace

TEST_CASE("synth_waveform: single tone peaks at its amplitude") {
  const Tone tones[] = {{60.0, 1.0, 0.0}};
  const auto ts = synth_waveform(tones, 1000.0, 1.0, 0.0);
  CHECK(ts.size() == 1000);
  double peak = 0.0;
  for (double v : ts.samples) peak = std::max(peak, v);
  CHECK(peak == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("synth_waveform: empty tone list is all zeros") {
  const auto ts = synth_waveform({}, 500.0, 0.2, 0.0);
  CHECK(ts.size() == 100);
  for (double v : ts.samples) CHECK(v == 0.0);
}

TEST_CASE("synth_waveform: two tones add at a common peak") {
  const Tone tones[] = {{60.0, 1.0, 0.0}, {180.0, 0.2, 0.0}};
  const auto ts = synth_waveform(tones, 1000.0, 0.1, 0.0);
  // Both cosines peak at t = 0 and again every 1/60 s.
  CHECK(ts.samples[0] == doctest::Approx(1.2).epsilon(1e-12));
  const double t = 37.0 / 1000.0;
  const double direct = std::cos(kTwoPi * 60.0 * t) + 0.2 * std::cos(kTwoPi * 180.0 * t);
  CHECK(ts.samples[37] == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("synth_waveform: aliasing and bad arguments are rejected") {
  const Tone high[] = {{500.0, 1.0, 0.0}};
  CHECK_THROWS_AS(synth_waveform(high, 1000.0, 1.0, 0.0), Error);
  const Tone ok[] = {{60.0, 1.0, 0.0}};
  CHECK_THROWS_AS(synth_waveform(ok, 1000.0, 0.0, 0.0), Error);
  CHECK_THROWS_AS(synth_waveform(ok, 1000.0, 1.0, -1.0), Error);
}

TEST_CASE("synth_waveform: seeded noise is reproducible with the requested spread") {
  const Tone none[] = {{60.0, 0.0, 0.0}};
  const auto a = synth_waveform(none, 1000.0, 20.0, 0.1, 42);
  const auto b = synth_waveform(none, 1000.0, 20.0, 0.1, 42);
  const auto c = synth_waveform(none, 1000.0, 20.0, 0.1, 43);
  CHECK(a.samples == b.samples);
  CHECK(a.samples != c.samples);
  double mean = 0.0, sq = 0.0;
  for (double v : a.samples) {
    mean += v;
    sq += v * v;
  }
  mean /= static_cast<double>(a.size());
  const double sd = std::sqrt(sq / static_cast<double>(a.size()) - mean * mean);
  CHECK(std::abs(mean) < 0.005);
  CHECK(sd == doctest::Approx(0.1).epsilon(0.02));
}

TEST_CASE("extract_phasor: matched tone, one cycle window") {
  const Tone tones[] = {{180.0, 1.0, 0.3}};
  const auto ts = synth_waveform(tones, 1080.0, 0.1, 0.0);
  const auto ph = extract_phasor(ts, 180.0, 1);
  CHECK(ph.window_samples == 6);
  for (std::size_t i = 0; i < ph.frames.size(); ++i) {
    CHECK(ph.frames[i].valid == (i + 1 >= ph.window_samples));
    if (!ph.frames[i].valid) continue;
    CHECK(ph.frames[i].magnitude == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(ph.frames[i].phase == doctest::Approx(0.3).epsilon(1e-9));
  }
}

TEST_CASE("extract_phasor: DC is orthogonal to the bin") {
  TimeSeries ts;
  ts.fs = 1080.0;
  ts.samples.assign(200, 3.7);
  const auto ph = extract_phasor(ts, 180.0, 3);
  for (const auto& f : ph.frames) {
    if (f.valid) CHECK(f.magnitude < 1e-9);
  }
}

TEST_CASE("extract_phasor: two-tone signal against a direct DFT") {
  const Tone tones[] = {{60.0, 2.0, 0.4}, {180.0, 0.5, -1.1}};
  const auto ts = synth_waveform(tones, 1800.0, 0.2, 0.0);
  const auto ph = extract_phasor(ts, 180.0, 3);
  CHECK(ph.window_samples == 30);
  for (std::size_t i = ph.window_samples - 1; i < ts.size(); i += 7) {
    const auto oracle = dft_bin(ts, 180.0, i + 1, ph.window_samples);
    CHECK(ph.frames[i].magnitude == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(std::abs(ph.frames[i].value() - oracle) < 1e-9);
  }
}

TEST_CASE("extract_phasor: linear in the input") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  TimeSeries x, y, z;
  x.fs = y.fs = z.fs = 1000.0;
  const double a = 1.7, b = -0.6;
  for (int i = 0; i < 800; ++i) {
    x.samples.push_back(g(rng));
    y.samples.push_back(g(rng));
    z.samples.push_back(a * x.samples.back() + b * y.samples.back());
  }
  const auto px = extract_phasor(x, 180.0, 3);
  const auto py = extract_phasor(y, 180.0, 3);
  const auto pz = extract_phasor(z, 180.0, 3);
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!pz.frames[i].valid) continue;
    const auto expect = a * px.frames[i].value() + b * py.frames[i].value();
    CHECK(std::abs(pz.frames[i].value() - expect) < 1e-9);
  }
}

TEST_CASE("extract_phasor: fractional window still recovers a pure tone") {
  // 1000 / 180 is not an integer; the least-squares bin stays exact.
  const Tone tones[] = {{180.0, 0.8, 1.0}};
  const auto ts = synth_waveform(tones, 1000.0, 0.3, 0.0);
  const auto ph = extract_phasor(ts, 180.0, 3);
  for (const auto& f : ph.frames) {
    if (!f.valid) continue;
    CHECK(f.magnitude == doctest::Approx(0.8).epsilon(1e-9));
    CHECK(f.phase == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("extract_phasor: magnitude ignores absolute phase, phase follows the offset") {
  for (double phi : {-2.5, -0.7, 0.0, 0.9, 3.0}) {
    const Tone tones[] = {{180.0, 1.3, phi}};
    const auto ts = synth_waveform(tones, 1800.0, 0.1, 0.0);
    const auto ph = extract_phasor(ts, 180.0, 3);
    const auto& f = ph.frames.back();
    CHECK(f.magnitude == doctest::Approx(1.3).epsilon(1e-9));
    CHECK(std::abs(std::remainder(f.phase - phi, kTwoPi)) < 1e-9);
    CHECK(f.phase > -std::numbers::pi);
    CHECK(f.phase <= std::numbers::pi);
  }
}

TEST_CASE("extract_phasor: synth round trip over bin-orthogonal tones") {
  const Tone tones[] = {{60.0, 1.0, 0.2}, {120.0, 0.3, -0.5}, {180.0, 0.7, 2.0}};
  const auto ts = synth_waveform(tones, 1800.0, 0.25, 0.0);
  for (const auto& tone : tones) {
    const auto ph = extract_phasor(ts, tone.freq, 6);
    const auto& f = ph.frames.back();
    CHECK(f.magnitude == doctest::Approx(tone.amplitude).epsilon(1e-9));
    CHECK(std::abs(std::remainder(f.phase - tone.phase, kTwoPi)) < 1e-9);
  }
}

TEST_CASE("extract_phasor: rejects windows longer than the series and f0 at Nyquist") {
  TimeSeries ts;
  ts.fs = 1000.0;
  ts.samples.assign(10, 0.0);
  CHECK_THROWS_AS(extract_phasor(ts, 180.0, 3), Error);
  ts.samples.assign(100, 0.0);
  CHECK_THROWS_AS(extract_phasor(ts, 500.0, 1), Error);
}

TEST_CASE("SlidingPhasor: periodic recomputation keeps long runs exact") {
  const Tone tones[] = {{180.0, 1.0, 0.1}};
  const auto ts = synth_waveform(tones, 1000.0, 60.0, 0.0);
  const auto ph = extract_phasor(ts, 180.0, 3);
  CHECK(ph.frames.back().magnitude == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("SlidingPhasor: tracked basis follows a drifting frequency") {
  // Chirp whose phase is known sample by sample.
  const double fs = 1000.0;
  SlidingPhasor p(fs, 180.0, window_length(fs, 180.0, 3));
  double cycles = 0.0;
  PhasorFrame f;
  for (int n = 0; n < 2000; ++n) {
    const double speed = 0.5 + 0.5 * n / 2000.0;
    const double x = 0.9 * std::cos(kTwoPi * cycles + 0.4);
    f = p.push_tracked(x, cycles);
    cycles += 180.0 * speed / fs;
  }
  CHECK(f.valid);
  CHECK(f.magnitude == doctest::Approx(0.9).epsilon(1e-9));
}

TEST_CASE("ingest_csv: fs from the time column") {
  const auto path = temp_path("two_rows.csv");
  {
    std::ofstream out(path);
    out << "t,a,b\n0,1,2\n0.001,3,4\n";
  }
  const auto chans = ingest_csv(path);
  REQUIRE(chans.size() == 2);
  CHECK(chans.at("a").fs == doctest::Approx(1000.0));
  CHECK(chans.at("b").samples == std::vector<double>{2.0, 4.0});
  std::filesystem::remove(path);
}

TEST_CASE("ingest_csv: malformed files are rejected") {
  const auto write = [](const std::string& name, const std::string& body) {
    const auto p = temp_path(name);
    std::ofstream(p) << body;
    return p;
  };
  CHECK_THROWS_AS(ingest_csv(write("gap.csv", "t,a\n0,1\n0.001,2\n0.003,3\n")), Error);
  CHECK_THROWS_AS(ingest_csv(write("nan.csv", "t,a\n0,1\n0.001,nan\n")), Error);
  CHECK_THROWS_AS(ingest_csv(write("missing.csv", "t,a,b\n0,1,\n0.001,2,3\n")), Error);
  CHECK_THROWS_AS(ingest_csv(write("empty.csv", "")), Error);
  CHECK_THROWS_AS(ingest_csv(temp_path("does_not_exist.csv")), Error);
}

TEST_CASE("ingest_csv: write then read round trip") {
  const Tone tones[] = {{60.0, 1.0, 0.0}, {180.0, 0.1, 0.5}};
  const auto a = synth_waveform(tones, 1000.0, 0.5, 0.05, 3);
  const auto b = synth_waveform(tones, 1000.0, 0.5, 0.05, 4);
  const auto path = temp_path("round_trip.csv");
  write_csv(path, {"a", "b"}, {&a, &b});
  const auto chans = ingest_csv(path);
  REQUIRE(chans.at("a").size() == a.size());
  CHECK(chans.at("a").fs == doctest::Approx(1000.0).epsilon(1e-9));
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::abs(chans.at("a").samples[i] - a.samples[i]) < 1e-9);
    CHECK(std::abs(chans.at("b").samples[i] - b.samples[i]) < 1e-9);
  }
  std::filesystem::remove(path);
}
