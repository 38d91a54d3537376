#include "statorguard/signal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace statorguard::signal {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMinConditioning = 0.05;

double wrap_phase(double phi) {
  // (-pi, pi]
  if (phi <= -std::numbers::pi) return phi + kTwoPi;
  return phi;
}

// cos/sin of 2 pi f t, with the cycle count reduced before scaling so the
// argument stays small on long records.
void basis_at(double f0, double t, double& c, double& s) {
  double cycles = f0 * t;
  cycles -= std::floor(cycles);
  const double arg = kTwoPi * cycles;
  c = std::cos(arg);
  s = std::sin(arg);
}

}  // namespace

TimeSeries synth_waveform(std::span<const Tone> tones, double fs, double duration,
                          double noise_std, std::uint64_t seed) {
  if (!(fs > 0.0)) throw Error("synth_waveform: fs must be positive");
  if (!(duration > 0.0)) throw Error("synth_waveform: duration must be positive");
  if (noise_std < 0.0) throw Error("synth_waveform: noise_std must be non-negative");
  for (const auto& tone : tones) {
    if (!(fs > 2.0 * std::abs(tone.freq))) {
      throw Error("synth_waveform: tone at " + std::to_string(tone.freq) +
                  " Hz aliases at fs=" + std::to_string(fs));
    }
  }

  const auto count = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(duration * fs)));
  TimeSeries ts;
  ts.fs = fs;
  ts.samples.assign(count, 0.0);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, noise_std > 0.0 ? noise_std : 1.0);
  for (std::size_t n = 0; n < count; ++n) {
    const double t = ts.time_at(n);
    double v = 0.0;
    for (const auto& tone : tones) {
      double c = 0.0, s = 0.0;
      basis_at(tone.freq, t, c, s);
      // cos(wt + phi) = cos wt cos phi - sin wt sin phi
      v += tone.amplitude * (c * std::cos(tone.phase) - s * std::sin(tone.phase));
    }
    if (noise_std > 0.0) v += gauss(rng);
    ts.samples[n] = v;
  }
  return ts;
}

std::size_t window_length(double fs, double f0, int cycles) {
  if (!(f0 > 0.0) || cycles < 1) throw Error("window_length: need f0 > 0 and cycles >= 1");
  return static_cast<std::size_t>(std::llround(cycles * fs / f0));
}

SlidingPhasor::SlidingPhasor(double fs, double f0, std::size_t window_samples, double t0,
                             int refresh_windows)
    : fs_(fs), f0_(f0), omega_(kTwoPi * f0), t0_(t0), window_(window_samples) {
  if (!(fs > 0.0)) throw Error("SlidingPhasor: fs must be positive");
  if (!(f0 > 0.0) || !(f0 < fs / 2.0)) throw Error("SlidingPhasor: need 0 < f0 < fs/2");
  if (window_ < 2) throw Error("SlidingPhasor: window must span at least 2 samples");
  refresh_every_ = window_ * static_cast<std::size_t>(std::max(1, refresh_windows));
  xs_.assign(window_, 0.0);
  cs_.assign(window_, 0.0);
  ss_.assign(window_, 0.0);
}

void SlidingPhasor::refresh() {
  sxc_ = sxs_ = scc_ = sss_ = scs_ = 0.0;
  for (std::size_t i = 0; i < filled_; ++i) {
    sxc_ += xs_[i] * cs_[i];
    sxs_ += xs_[i] * ss_[i];
    scc_ += cs_[i] * cs_[i];
    sss_ += ss_[i] * ss_[i];
    scs_ += cs_[i] * ss_[i];
  }
  since_refresh_ = 0;
}

PhasorFrame SlidingPhasor::push(double x) {
  const double t = t0_ + static_cast<double>(n_) / fs_;
  double c = 0.0, s = 0.0;
  basis_at(f0_, t, c, s);
  return push_basis(x, c, s);
}

PhasorFrame SlidingPhasor::push_tracked(double x, double cycles) {
  cycles -= std::floor(cycles);
  return push_basis(x, std::cos(kTwoPi * cycles), std::sin(kTwoPi * cycles));
}

PhasorFrame SlidingPhasor::push_basis(double x, double c, double s) {
  ++n_;
  if (filled_ == window_) {
    const double xo = xs_[head_], co = cs_[head_], so = ss_[head_];
    sxc_ -= xo * co;
    sxs_ -= xo * so;
    scc_ -= co * co;
    sss_ -= so * so;
    scs_ -= co * so;
  } else {
    ++filled_;
  }
  xs_[head_] = x;
  cs_[head_] = c;
  ss_[head_] = s;
  head_ = (head_ + 1) % window_;
  sxc_ += x * c;
  sxs_ += x * s;
  scc_ += c * c;
  sss_ += s * s;
  scs_ += c * s;
  last_c_ = c;
  last_s_ = s;

  if (++since_refresh_ >= refresh_every_) refresh();

  PhasorFrame frame;
  if (filled_ < window_) return frame;

  const double det = scc_ * sss_ - scs_ * scs_;
  // A window spanning whole cycles has det = (W/2)^2. Much less means the
  // basis barely rotates inside the window (tracked phase nearly frozen).
  const double half = 0.5 * static_cast<double>(window_);
  if (!(det > kMinConditioning * half * half)) return frame;
  const double a = (sxc_ * sss_ - sxs_ * scs_) / det;
  const double b = (sxs_ * scc_ - sxc_ * scs_) / det;
  last_ = {a, -b};
  frame.magnitude = std::abs(last_);
  frame.phase = wrap_phase(std::arg(last_));
  frame.valid = true;
  return frame;
}

double SlidingPhasor::reconstruct_last() const {
  return last_.real() * last_c_ - last_.imag() * last_s_;
}

PhasorSeries extract_phasor(const TimeSeries& ts, double f0, int window_cycles) {
  if (!(f0 < ts.fs / 2.0)) throw Error("extract_phasor: f0 must be below fs/2");
  const std::size_t window = window_length(ts.fs, f0, window_cycles);
  if (window > ts.size()) throw Error("extract_phasor: window longer than series");

  PhasorSeries out;
  out.f0 = f0;
  out.window_cycles = window_cycles;
  out.window_samples = window;
  out.frames.reserve(ts.size());
  SlidingPhasor est(ts.fs, f0, window, ts.t0);
  for (double x : ts.samples) out.frames.push_back(est.push(x));
  return out;
}

namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    std::size_t lead = 0;
    while (lead < cell.size() && cell[lead] == ' ') ++lead;
    cells.push_back(cell.substr(lead));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
  const auto where = [&] { return " at row " + std::to_string(row) + ", column '" + column + "'"; };
  if (cell.empty()) throw Error("ingest_csv: missing value" + where());
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    throw Error("ingest_csv: unparsable value '" + cell + "'" + where());
  }
  if (used != cell.size()) throw Error("ingest_csv: unparsable value '" + cell + "'" + where());
  if (!std::isfinite(v)) throw Error("ingest_csv: non-finite value" + where());
  return v;
}

}  // namespace

std::map<std::string, TimeSeries> ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("ingest_csv: cannot open " + path);

  std::string line;
  if (!std::getline(in, line) || line.empty()) throw Error("ingest_csv: empty file " + path);
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
  const auto header = split_row(line);
  if (header.size() < 2) throw Error("ingest_csv: header needs a time column and at least one channel");

  std::vector<double> times;
  std::vector<std::vector<double>> columns(header.size() - 1);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_row(line);
    if (cells.size() != header.size()) {
      throw Error("ingest_csv: row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                  " cells, expected " + std::to_string(header.size()));
    }
    times.push_back(parse_cell(cells[0], row, header[0]));
    for (std::size_t c = 1; c < cells.size(); ++c) columns[c - 1].push_back(parse_cell(cells[c], row, header[c]));
  }
  if (times.size() < 2) throw Error("ingest_csv: need at least two samples to infer fs");

  const double dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  if (!(dt > 0.0)) throw Error("ingest_csv: time column must be increasing");
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double expected = times.front() + static_cast<double>(i) * dt;
    if (std::abs(times[i] - expected) > 1e-6 * dt) {
      throw Error("ingest_csv: non-uniform time step near row " + std::to_string(i + 2));
    }
  }

  std::map<std::string, TimeSeries> out;
  for (std::size_t c = 1; c < header.size(); ++c) {
    TimeSeries ts;
    ts.fs = 1.0 / dt;
    ts.t0 = times.front();
    ts.samples = std::move(columns[c - 1]);
    out.emplace(header[c], std::move(ts));
  }
  return out;
}

void write_csv(const std::string& path, const std::vector<std::string>& names,
               const std::vector<const TimeSeries*>& channels) {
  if (names.size() != channels.size() || channels.empty()) throw Error("write_csv: names/channels mismatch");
  const std::size_t n = channels.front()->size();
  for (const auto* ch : channels) {
    if (ch->size() != n) throw Error("write_csv: channels differ in length");
  }
  std::ofstream out(path);
  if (!out) throw Error("write_csv: cannot open " + path + " for writing");
  out.precision(17);
  out << 't';
  for (const auto& name : names) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    out << channels.front()->time_at(i);
    for (const auto* ch : channels) out << ',' << ch->samples[i];
    out << '\n';
  }
  if (!out) throw Error("write_csv: write failed for " + path);
}

}  // namespace statorguard::signal
