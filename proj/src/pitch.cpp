#include "harmonika/pitch.hpp"

#include "harmonika/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace harmonika {

namespace {

double reflected(const std::vector<double>& x, std::ptrdiff_t i) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  if (n == 1) return x[0];
  const std::ptrdiff_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  if (i >= n) i = period - i;
  return x[static_cast<std::size_t>(i)];
}

constexpr double kPeakRatio = 0.9;

} // namespace

PitchContour extract_f0(const AudioBuffer& buf, const PitchConfig& cfg) {
  if (!(cfg.f_floor > 0.0) || !(cfg.f_ceil > cfg.f_floor)) {
    throw ConfigError("pitch range needs 0 < f_floor < f_ceil");
  }
  const double fs = buf.sample_rate();
  if (fs < 4.0 * cfg.f_ceil) {
    throw ConfigError("sample rate " + std::to_string(fs) + " Hz is below 4 * f_ceil");
  }
  if (cfg.hop_size == 0 || cfg.frame_size < 4) throw ConfigError("bad pitch framing");
  if (buf.empty()) throw SizeError("empty buffer");

  const auto lag_min = static_cast<std::size_t>(std::max(2.0, std::floor(fs / cfg.f_ceil)));
  const auto lag_max = static_cast<std::size_t>(std::ceil(fs / cfg.f_floor));
  if (lag_max + 2 >= cfg.frame_size) {
    throw ConfigError("pitch frame too short for f_floor");
  }

  const auto& x = buf.samples();
  const std::size_t n = cfg.frame_size;
  const std::size_t frames = 1 + x.size() / cfg.hop_size;
  PitchContour out;
  out.frame_hop_s = static_cast<double>(cfg.hop_size) / fs;
  out.frames.resize(frames);

  std::vector<double> frame(n);
  std::vector<double> r(lag_max + 2, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    out.frames[t].time_s = static_cast<double>(t * cfg.hop_size) / fs;
    const auto start = static_cast<std::ptrdiff_t>(t * cfg.hop_size) - static_cast<std::ptrdiff_t>(n / 2);
    double energy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      frame[i] = reflected(x, start + static_cast<std::ptrdiff_t>(i));
      energy += frame[i] * frame[i];
    }
    if (std::sqrt(energy / static_cast<double>(n)) < cfg.silence_rms) continue;

    // Energies of the head [0, n - lag) and tail [lag, n) windows.
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + frame[i] * frame[i];
    for (std::size_t lag = lag_min - 1; lag <= lag_max + 1; ++lag) {
      double acc = 0.0;
      for (std::size_t i = 0; i + lag < n; ++i) acc += frame[i] * frame[i + lag];
      const double head = prefix[n - lag];
      const double tail = prefix[n] - prefix[lag];
      const double denom = std::sqrt(head * tail);
      r[lag] = denom > 0.0 ? acc / denom : 0.0;
    }

    double best = -1.0;
    for (std::size_t lag = lag_min; lag <= lag_max; ++lag) {
      if (r[lag] >= r[lag - 1] && r[lag] > r[lag + 1]) best = std::max(best, r[lag]);
    }
    if (best < cfg.voicing_threshold) continue;
    std::size_t pick = 0;
    for (std::size_t lag = lag_min; lag <= lag_max; ++lag) {
      if (r[lag] >= r[lag - 1] && r[lag] > r[lag + 1] && r[lag] >= kPeakRatio * best) {
        pick = lag;
        break;
      }
    }
    if (r[pick] < cfg.voicing_threshold) continue;

    const double a = r[pick - 1];
    const double b = r[pick];
    const double c = r[pick + 1];
    const double curvature = a - 2.0 * b + c;
    const double shift = curvature != 0.0 ? 0.5 * (a - c) / curvature : 0.0;
    const double f0 = fs / (static_cast<double>(pick) + shift);
    if (f0 >= cfg.f_floor && f0 <= cfg.f_ceil) out.frames[t].f0_hz = f0;
  }
  return out;
}

F0Comparison f0rmse(const PitchContour& ref, const PitchContour& est) {
  if (std::abs(ref.frame_hop_s - est.frame_hop_s) > 1e-12) {
    throw ConfigError("pitch contours use different hops");
  }
  F0Comparison cmp;
  cmp.frames = std::min(ref.frames.size(), est.frames.size());
  if (cmp.frames == 0) throw DegenerateDataError("no overlap: empty pitch contour");
  double sq = 0.0;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < cmp.frames; ++i) {
    const double a = ref.frames[i].f0_hz;
    const double b = est.frames[i].f0_hz;
    if ((a > 0.0) == (b > 0.0)) ++agree;
    if (a > 0.0 && b > 0.0) {
      sq += (a - b) * (a - b);
      ++cmp.co_voiced;
    }
  }
  if (cmp.co_voiced == 0) throw DegenerateDataError("no overlap: no co-voiced frames");
  cmp.f0rmse = std::sqrt(sq / static_cast<double>(cmp.co_voiced));
  cmp.voiced_agreement = static_cast<double>(agree) / static_cast<double>(cmp.frames);
  return cmp;
}

void write_contour_csv(const PitchContour& contour, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "time_s,f0_hz\n";
  char line[64];
  for (const auto& f : contour.frames) {
    std::snprintf(line, sizeof line, "%.6f,%.4f\n", f.time_s, f.f0_hz);
    out << line;
  }
}

std::string metric_report_json(const MetricReport& report) {
  const nlohmann::ordered_json j = {{"mcd_db", report.mcd_db},
                                    {"f0rmse", report.f0rmse},
                                    {"voiced_agreement", report.voiced_agreement}};
  return j.dump(2);
}

} // namespace harmonika
