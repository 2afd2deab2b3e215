#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace harmonika {

// Mono signal with its sampling rate. Amplitudes are nominally in [-1, 1].
class AudioBuffer {
public:
  AudioBuffer() = default;

  // Throws ConfigError when sample_rate <= 0 or a sample is not finite.
  AudioBuffer(std::vector<double> samples, double sample_rate);

  const std::vector<double>& samples() const noexcept { return samples_; }
  double sample_rate() const noexcept { return sample_rate_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  double duration_s() const noexcept {
    return static_cast<double>(samples_.size()) / sample_rate_;
  }

private:
  std::vector<double> samples_;
  double sample_rate_ = 1.0;
};

enum class WavEncoding { pcm16, float32 };

// Reads a RIFF/WAVE file holding PCM16 or IEEE float32 samples. Multi-channel
// input is averaged down to mono. PCM16 is scaled by 1/32768.
//
// Throws FormatError for malformed/truncated files and UnsupportedError for
// any other sample encoding.
AudioBuffer load_wav(const std::filesystem::path& path);

// Writes a mono WAV file. PCM16 output is clipped to [-1, 32767/32768].
void save_wav(const std::filesystem::path& path, const AudioBuffer& buf,
              WavEncoding encoding = WavEncoding::pcm16);

// Band-limited (Kaiser-windowed sinc) sample-rate conversion. The output has
// round(n * target / source) samples; when the rates match the input is
// returned unchanged.
AudioBuffer resample(const AudioBuffer& buf, double target_rate);

} // namespace harmonika
