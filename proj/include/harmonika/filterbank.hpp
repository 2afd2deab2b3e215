#pragma once

#include "harmonika/stft.hpp"
#include "harmonika/tensor.hpp"

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace harmonika {

struct HarmonicBankConfig {
  double f_min = 32.7;
  std::size_t bins_per_octave = 24;
  std::size_t num_harmonics = 10;
  bool include_half = true;
  double sample_rate = 24000.0;
  // One bandwidth divisor per harmonic slice instead of a single global one.
  bool per_slice_gamma = false;
  // Apply log1p to the projected values.
  bool log_compress = false;

  // Highest base-grid frequency, f_s / (2H).
  double f_max() const;
  void validate() const;
};

// Unscaled ERB-style bandwidth of a harmonic filter, divided by the clamped
// bandwidth divisor: (0.1079 h f_c + 24.7) / max(gamma, 1).
double harmonic_bandwidth(double order, double center_hz, double gamma);

struct NyquistViolation {
  std::size_t slice = 0;
  std::size_t bin = 0;
  double upper_edge_hz = 0.0;
};

// Triangular band-pass filters centred on h * f_min * 2^(k/B) for every
// harmonic order h and base bin k. Immutable; with_gamma() returns a copy.
class HarmonicFilterBank {
public:
  // Throws ConfigError when the configuration is inconsistent.
  static HarmonicFilterBank build(const HarmonicBankConfig& cfg);

  const HarmonicBankConfig& config() const noexcept { return cfg_; }
  std::size_t num_bins() const noexcept { return base_.size(); }
  std::size_t num_slices() const noexcept { return orders_.size(); }
  const std::vector<double>& harmonic_orders() const noexcept { return orders_; }
  // Slice holding the given order; throws ConfigError when absent.
  std::size_t slice_of(double order) const;

  double base_center(std::size_t bin) const { return base_[bin]; }
  double center(std::size_t slice, std::size_t bin) const { return orders_[slice] * base_[bin]; }

  // Stored (unclamped) divisors: one value, or one per slice.
  const std::vector<double>& gamma() const noexcept { return gamma_; }
  double gamma_of_slice(std::size_t slice) const {
    return gamma_.size() == 1 ? gamma_[0] : gamma_[slice];
  }
  HarmonicFilterBank with_gamma(std::vector<double> gamma) const;

  // Bandwidth of the filter for harmonic `order` at base frequency f_c.
  double bandwidth(double order, double f_c) const;
  double bandwidth_at(std::size_t slice, std::size_t bin) const;

  // [1 - 2|f - h f_c| / bw]_+
  double filter_response(std::size_t slice, std::size_t bin, double f) const;

  // Filters whose upper support edge exceeds f_s/2 with the divisor at 1.
  std::vector<NyquistViolation> nyquist_violations() const;

private:
  HarmonicBankConfig cfg_;
  std::vector<double> base_;
  std::vector<double> orders_;
  std::vector<double> gamma_;
};

// Linear-magnitude spectrogram, frame-major.
struct MagnitudeSpectrogram {
  std::size_t bins = 0;
  std::size_t frames = 0;
  double sample_rate = 0.0;
  std::size_t fft_size = 0;
  std::size_t hop_size = 0;
  std::vector<double> values;  // [frame * bins + bin]

  static MagnitudeSpectrogram from(const ComplexSpectrogram& spec);
  double bin_hz() const { return sample_rate / static_cast<double>(fft_size); }
};

struct HarmonicTensor {
  Tensor3 values;  // [slice, bin, frame]
  std::vector<double> harmonic_orders;
  double frame_hop_s = 0.0;
};

// values(s, k, t) = sum_b response(s, k, f_b) |X(b, t)|, optionally log1p'd.
// Throws ConfigError when the spectrogram sample rate differs from the bank's.
HarmonicTensor project(const HarmonicFilterBank& bank, const MagnitudeSpectrogram& mag);
HarmonicTensor project(const HarmonicFilterBank& bank, const ComplexSpectrogram& spec);

// dL/dgamma given dL/dvalues. One entry per stored divisor. Zero for any
// divisor below 1 (the clamp is flat there).
std::vector<double> gamma_gradient(const HarmonicFilterBank& bank,
                                   const MagnitudeSpectrogram& mag,
                                   const Tensor3& upstream);
std::vector<double> gamma_gradient(const HarmonicFilterBank& bank,
                                   const ComplexSpectrogram& spec,
                                   const Tensor3& upstream);

// {f_min, B, H, include_half, gamma, num_bins, centers: [[...] per slice]}
void dump_bank_json(const HarmonicFilterBank& bank, const std::filesystem::path& path);
// slice,order,bin,center_hz,bandwidth_hz
void dump_bank_csv(const HarmonicFilterBank& bank, const std::filesystem::path& path);

// Little-endian float32 payload in [slice][bin][frame] order plus a JSON
// sidecar at `<path>.json`.
void write_tensor_f32(const HarmonicTensor& tensor, const std::filesystem::path& path);
HarmonicTensor read_tensor_f32(const std::filesystem::path& path);
// One row per (slice, bin), one column per frame.
void write_tensor_csv(const HarmonicTensor& tensor, const std::filesystem::path& path);

} // namespace harmonika
