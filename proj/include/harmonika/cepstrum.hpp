#pragma once

#include "harmonika/audio.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace harmonika {

struct CepstrumConfig {
  std::size_t fft_size = 1024;
  std::size_t hop_size = 256;
  std::size_t mel_bands = 40;
  std::size_t coefficients = 13;  // c1..cN, c0 dropped
  double log_floor = 1e-10;
};

// frames x coefficients, row-major.
struct CepstralTrack {
  std::size_t frames = 0;
  std::size_t coeffs = 0;
  double frame_hop_s = 0.0;
  std::vector<double> values;

  std::span<const double> frame(std::size_t i) const {
    return {values.data() + i * coeffs, coeffs};
  }
};

// Hann STFT -> triangular HTK-mel power energies over [0, f_s/2] -> natural
// log (floored) -> orthonormal DCT-II -> c1..cN.
// Throws SizeError when the buffer is shorter than one FFT frame.
CepstralTrack mel_cepstrum(const AudioBuffer& buf, const CepstrumConfig& cfg = {});

struct DtwResult {
  double total_cost = 0.0;      // sum of frame distances along the path
  std::size_t path_length = 0;  // number of aligned pairs
};

// Symmetric-step DTW (right, down, diagonal; unit weights, no band) over
// Euclidean frame distances. Among paths of equal cost the shorter one wins.
DtwResult dtw(const CepstralTrack& a, const CepstralTrack& b);

// (10 / ln 10) * sqrt(2)
double mcd_constant();

// Mel-cepstral distortion in dB: constant * mean over the DTW path of ||dc||.
// Throws SizeError for empty tracks or mismatched coefficient counts.
double mcd(const CepstralTrack& a, const CepstralTrack& b);

// MCD over the identity alignment of two equal-length tracks.
double mcd_aligned(const CepstralTrack& a, const CepstralTrack& b);

} // namespace harmonika
