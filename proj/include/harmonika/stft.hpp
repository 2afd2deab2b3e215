#pragma once

#include "harmonika/audio.hpp"

#include <complex>
#include <cstddef>
#include <filesystem>
#include <string_view>
#include <vector>

namespace harmonika {

enum class WindowType { hann, rectangular };

WindowType parse_window(std::string_view name);
std::string_view to_string(WindowType w);

struct StftConfig {
  std::size_t fft_size = 2048;
  std::size_t hop_size = 256;
  WindowType window = WindowType::hann;
  // Reflect-pad by fft_size/2 on both sides so that frame t is centred on
  // sample t * hop_size.
  bool center = true;

  // Throws ConfigError unless 0 < hop <= fft_size and fft_size is a power of 2.
  void validate() const;
};

// Periodic analysis window of the given length.
std::vector<double> make_window(WindowType type, std::size_t length);

// One-sided STFT. Element (k, t) holds sum_n x(n) w(n) e^{-j 2 pi k n / N}
// for the frame starting at t * hop (in padded coordinates).
class ComplexSpectrogram {
public:
  ComplexSpectrogram() = default;
  ComplexSpectrogram(std::size_t bins, std::size_t frames, double sample_rate,
                     std::size_t fft_size, std::size_t hop_size);

  std::size_t bins() const noexcept { return bins_; }
  std::size_t frames() const noexcept { return frames_; }
  double sample_rate() const noexcept { return sample_rate_; }
  std::size_t fft_size() const noexcept { return fft_size_; }
  std::size_t hop_size() const noexcept { return hop_size_; }
  double bin_hz() const noexcept { return sample_rate_ / static_cast<double>(fft_size_); }
  double frame_hop_s() const noexcept { return static_cast<double>(hop_size_) / sample_rate_; }

  std::complex<double>& at(std::size_t bin, std::size_t frame) {
    return values_[frame * bins_ + bin];
  }
  const std::complex<double>& at(std::size_t bin, std::size_t frame) const {
    return values_[frame * bins_ + bin];
  }

  // Contiguous bins of one frame.
  std::complex<double>* frame_data(std::size_t frame) { return &values_[frame * bins_]; }
  const std::complex<double>* frame_data(std::size_t frame) const {
    return &values_[frame * bins_];
  }

  // Magnitude |X| laid out frame-major: [frame * bins + bin].
  std::vector<double> magnitude() const;

private:
  std::size_t bins_ = 0;
  std::size_t frames_ = 0;
  double sample_rate_ = 1.0;
  std::size_t fft_size_ = 0;
  std::size_t hop_size_ = 0;
  std::vector<std::complex<double>> values_;
};

// Number of frames produced for a signal of n samples.
std::size_t stft_frame_count(std::size_t n, const StftConfig& cfg);

// Throws SizeError when the buffer is shorter than fft_size.
ComplexSpectrogram stft(const AudioBuffer& buf, const StftConfig& cfg);

// Frame-major CSV of |X| (one row per frame) plus a JSON sidecar
// {bins, frames, bin_hz, hop_s} at `<csv_path>.json`.
void dump_spectrogram_csv(const ComplexSpectrogram& spec,
                          const std::filesystem::path& csv_path);

} // namespace harmonika
