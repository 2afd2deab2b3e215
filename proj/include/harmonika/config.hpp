#pragma once

#include "harmonika/cepstrum.hpp"
#include "harmonika/discnet.hpp"
#include "harmonika/filterbank.hpp"
#include "harmonika/pitch.hpp"
#include "harmonika/stft.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace harmonika {

// Every tunable of a CLI run. Defaults reproduce the reference setup:
// 24 kHz, STFT 2048/256 Hann, f_min 32.7 Hz, B = 24, H = 10 plus a half
// harmonic, 32 channels, kernels 7 / 5, dilations 1-2-4.
struct RunConfig {
  std::uint64_t seed = 0;
  double sample_rate = 24000.0;
  StftConfig stft;
  HarmonicBankConfig bank;  // bank.sample_rate mirrors sample_rate
  NetConfig net;            // in_channels / freq_bins follow the bank
  PitchConfig pitch;
  CepstrumConfig cepstrum;

  void validate() const;
  // Network shape for the bank this config builds.
  NetConfig net_for(const HarmonicFilterBank& bank) const;
};

// Missing keys keep their defaults; unknown keys raise ConfigError.
RunConfig config_from_json(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const RunConfig& cfg);

} // namespace harmonika
