#pragma once

#include "harmonika/audio.hpp"

#include <complex>
#include <cstddef>
#include <vector>

namespace harmonika {

// Log-frequency grid of a constant-Q transform: f_k = f_min * 2^(k/B) with a
// fixed ratio Q = f_k / bandwidth_k = 1 / (2^(1/B) - 1).
struct CqtGrid {
  double f_min = 32.7;
  std::size_t bins_per_octave = 24;
  std::size_t num_bins = 0;
  double sample_rate = 24000.0;
  double q_factor = 0.0;
  std::vector<std::size_t> window_lengths;  // N_k = ceil(Q f_s / f_k)

  double center(std::size_t k) const;
  double bandwidth(std::size_t k) const { return center(k) / q_factor; }
};

// Throws ConfigError for non-positive inputs or when N_k is not strictly
// decreasing.
CqtGrid make_cqt_grid(double f_min, std::size_t bins_per_octave,
                      std::size_t num_bins, double sample_rate);

// Complex CQT values laid out [bin][frame].
struct CqtResult {
  std::size_t bins = 0;
  std::size_t frames = 0;
  std::vector<std::complex<double>> values;

  const std::complex<double>& at(std::size_t k, std::size_t t) const {
    return values[k * frames + t];
  }
};

// Direct evaluation of
//   X(k, t) = sum_n x(c_t - N_k/2 + n) (1/N_k) w_k(n) e^{-j 2 pi Q n / N_k}
// with a Hann window of length N_k centred on c_t = t * hop. All bins share
// the STFT frame grid (1 + len/hop frames); samples beyond the ends are
// reflected.
//
// Throws NyquistError when f_k (1 + 1/(2Q)) > f_s/2 for some k, ConfigError
// on a sample-rate mismatch and SizeError when the buffer is shorter than
// the longest window.
CqtResult cqt(const AudioBuffer& buf, const CqtGrid& grid, std::size_t hop = 256);

// Distance in octaves from h * f_min to the nearest grid bin. Zero iff the
// h-th harmonic of the lowest bin falls exactly on the grid.
double cqt_harmonic_coverage(const CqtGrid& grid, unsigned h);

} // namespace harmonika
