#include "harmonika/cepstrum.hpp"

#include "harmonika/error.hpp"
#include "harmonika/stft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace harmonika {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// [band][bin] triangular weights, peak 1 at each band centre.
std::vector<double> mel_weights(std::size_t bands, std::size_t bins, double sample_rate,
                                std::size_t fft_size) {
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(bands + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_hi * static_cast<double>(i) / static_cast<double>(bands + 1));
  }
  const double bin_hz = sample_rate / static_cast<double>(fft_size);
  std::vector<double> w(bands * bins, 0.0);
  for (std::size_t m = 0; m < bands; ++m) {
    const double lo = edges[m];
    const double mid = edges[m + 1];
    const double hi = edges[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      double v = 0.0;
      if (f > lo && f <= mid) {
        v = (f - lo) / (mid - lo);
      } else if (f > mid && f < hi) {
        v = (hi - f) / (hi - mid);
      }
      w[m * bins + k] = v;
    }
  }
  return w;
}

double frame_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

void check_tracks(const CepstralTrack& a, const CepstralTrack& b) {
  if (a.frames == 0 || b.frames == 0) throw SizeError("cepstral track is empty");
  if (a.coeffs != b.coeffs) {
    throw SizeError("cepstral tracks have " + std::to_string(a.coeffs) + " vs " +
                    std::to_string(b.coeffs) + " coefficients");
  }
}

} // namespace

CepstralTrack mel_cepstrum(const AudioBuffer& buf, const CepstrumConfig& cfg) {
  if (cfg.coefficients + 1 > cfg.mel_bands) {
    throw ConfigError("need more mel bands than cepstral coefficients");
  }
  StftConfig scfg;
  scfg.fft_size = cfg.fft_size;
  scfg.hop_size = cfg.hop_size;
  scfg.window = WindowType::hann;
  const ComplexSpectrogram spec = stft(buf, scfg);  // SizeError when too short

  const std::size_t bins = spec.bins();
  const std::size_t bands = cfg.mel_bands;
  const auto weights = mel_weights(bands, bins, buf.sample_rate(), cfg.fft_size);

  // Orthonormal DCT-II rows 1..N.
  std::vector<double> dct(cfg.coefficients * bands);
  const double scale = std::sqrt(2.0 / static_cast<double>(bands));
  for (std::size_t q = 0; q < cfg.coefficients; ++q) {
    for (std::size_t m = 0; m < bands; ++m) {
      dct[q * bands + m] = scale * std::cos(std::numbers::pi * static_cast<double>(q + 1) *
                                            (static_cast<double>(m) + 0.5) /
                                            static_cast<double>(bands));
    }
  }

  CepstralTrack track;
  track.frames = spec.frames();
  track.coeffs = cfg.coefficients;
  track.frame_hop_s = spec.frame_hop_s();
  track.values.resize(track.frames * track.coeffs);

  std::vector<double> power(bins);
  std::vector<double> log_mel(bands);
  for (std::size_t t = 0; t < spec.frames(); ++t) {
    const auto* row = spec.frame_data(t);
    for (std::size_t k = 0; k < bins; ++k) power[k] = std::norm(row[k]);
    for (std::size_t m = 0; m < bands; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < bins; ++k) e += weights[m * bins + k] * power[k];
      log_mel[m] = std::log(std::max(e, cfg.log_floor));
    }
    for (std::size_t q = 0; q < cfg.coefficients; ++q) {
      double c = 0.0;
      for (std::size_t m = 0; m < bands; ++m) c += dct[q * bands + m] * log_mel[m];
      track.values[t * track.coeffs + q] = c;
    }
  }
  return track;
}

DtwResult dtw(const CepstralTrack& a, const CepstralTrack& b) {
  check_tracks(a, b);
  const std::size_t n = a.frames;
  const std::size_t m = b.frames;
  std::vector<double> cost(n * m);
  std::vector<std::size_t> steps(n * m);
  auto better = [&](std::size_t x, std::size_t y) {
    return cost[x] < cost[y] || (cost[x] == cost[y] && steps[x] < steps[y]);
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = frame_distance(a.frame(i), b.frame(j));
      const std::size_t here = i * m + j;
      if (i == 0 && j == 0) {
        cost[here] = d;
        steps[here] = 1;
        continue;
      }
      std::size_t best = 0;
      bool have = false;
      auto consider = [&](std::size_t idx) {
        if (!have || better(idx, best)) {
          best = idx;
          have = true;
        }
      };
      if (i > 0 && j > 0) consider((i - 1) * m + (j - 1));
      if (i > 0) consider((i - 1) * m + j);
      if (j > 0) consider(i * m + (j - 1));
      cost[here] = cost[best] + d;
      steps[here] = steps[best] + 1;
    }
  }
  return {cost.back(), steps.back()};
}

double mcd_constant() { return 10.0 / std::numbers::ln10 * std::numbers::sqrt2; }

double mcd(const CepstralTrack& a, const CepstralTrack& b) {
  const DtwResult r = dtw(a, b);
  return mcd_constant() * r.total_cost / static_cast<double>(r.path_length);
}

double mcd_aligned(const CepstralTrack& a, const CepstralTrack& b) {
  check_tracks(a, b);
  if (a.frames != b.frames) throw SizeError("identity alignment needs equal frame counts");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.frames; ++i) acc += frame_distance(a.frame(i), b.frame(i));
  return mcd_constant() * acc / static_cast<double>(a.frames);
}

} // namespace harmonika
