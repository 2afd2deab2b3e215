#include "harmonika/config.hpp"

#include "harmonika/error.hpp"

#include <json.hpp>

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string_view>

namespace harmonika {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void reject_unknown(const json& obj, std::string_view where,
                    std::initializer_list<std::string_view> known) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown config key " + std::string(where) + "." + key);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& dst) {
  if (obj.contains(key)) dst = obj.at(key).get<T>();
}

} // namespace

void RunConfig::validate() const {
  if (!(sample_rate > 0.0)) throw ConfigError("sample_rate must be positive");
  stft.validate();
  bank.validate();
  net.validate();
  if (pitch.f_ceil * 4.0 > sample_rate) throw ConfigError("metrics.f_ceil too high for sample rate");
}

NetConfig RunConfig::net_for(const HarmonicFilterBank& b) const {
  NetConfig n = net;
  n.in_channels = b.num_slices();
  n.freq_bins = b.num_bins();
  return n;
}

RunConfig config_from_json(const std::string& text) {
  RunConfig cfg;
  try {
    const json root = json::parse(text);
    reject_unknown(root, "config", {"seed", "frontend", "filterbank", "discnet", "metrics"});
    read(root, "seed", cfg.seed);

    if (root.contains("frontend")) {
      const json& f = root.at("frontend");
      reject_unknown(f, "frontend", {"sample_rate", "fft_size", "hop_size", "window"});
      read(f, "sample_rate", cfg.sample_rate);
      read(f, "fft_size", cfg.stft.fft_size);
      read(f, "hop_size", cfg.stft.hop_size);
      if (f.contains("window")) cfg.stft.window = parse_window(f.at("window").get<std::string>());
    }
    if (root.contains("filterbank")) {
      const json& b = root.at("filterbank");
      reject_unknown(b, "filterbank", {"f_min", "bins_per_octave", "num_harmonics", "include_half",
                                       "per_slice_gamma", "log_compress"});
      read(b, "f_min", cfg.bank.f_min);
      read(b, "bins_per_octave", cfg.bank.bins_per_octave);
      read(b, "num_harmonics", cfg.bank.num_harmonics);
      read(b, "include_half", cfg.bank.include_half);
      read(b, "per_slice_gamma", cfg.bank.per_slice_gamma);
      read(b, "log_compress", cfg.bank.log_compress);
    }
    if (root.contains("discnet")) {
      const json& d = root.at("discnet");
      reject_unknown(d, "discnet", {"channels", "hcb_kernel", "mdc_kernel", "dilations",
                                    "final_time_kernel", "leaky_slope"});
      read(d, "channels", cfg.net.channels);
      read(d, "hcb_kernel", cfg.net.hcb_kernel);
      read(d, "mdc_kernel", cfg.net.mdc_kernel);
      read(d, "dilations", cfg.net.dilations);
      read(d, "final_time_kernel", cfg.net.final_time_kernel);
      read(d, "leaky_slope", cfg.net.leaky_slope);
    }
    if (root.contains("metrics")) {
      const json& m = root.at("metrics");
      reject_unknown(m, "metrics", {"f_floor", "f_ceil", "pitch_frame_size", "pitch_hop_size",
                                    "voicing_threshold", "silence_rms", "mcd_fft_size",
                                    "mcd_hop_size", "mel_bands", "cepstral_coefficients"});
      read(m, "f_floor", cfg.pitch.f_floor);
      read(m, "f_ceil", cfg.pitch.f_ceil);
      read(m, "pitch_frame_size", cfg.pitch.frame_size);
      read(m, "pitch_hop_size", cfg.pitch.hop_size);
      read(m, "voicing_threshold", cfg.pitch.voicing_threshold);
      read(m, "silence_rms", cfg.pitch.silence_rms);
      read(m, "mcd_fft_size", cfg.cepstrum.fft_size);
      read(m, "mcd_hop_size", cfg.cepstrum.hop_size);
      read(m, "mel_bands", cfg.cepstrum.mel_bands);
      read(m, "cepstral_coefficients", cfg.cepstrum.coefficients);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config JSON: ") + e.what());
  }
  cfg.bank.sample_rate = cfg.sample_rate;
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

std::string config_to_json(const RunConfig& cfg) {
  ordered_json j;
  j["seed"] = cfg.seed;
  j["frontend"] = {{"sample_rate", cfg.sample_rate},
                   {"fft_size", cfg.stft.fft_size},
                   {"hop_size", cfg.stft.hop_size},
                   {"window", std::string(to_string(cfg.stft.window))}};
  j["filterbank"] = {{"f_min", cfg.bank.f_min},
                     {"bins_per_octave", cfg.bank.bins_per_octave},
                     {"num_harmonics", cfg.bank.num_harmonics},
                     {"include_half", cfg.bank.include_half},
                     {"per_slice_gamma", cfg.bank.per_slice_gamma},
                     {"log_compress", cfg.bank.log_compress}};
  j["discnet"] = {{"channels", cfg.net.channels},
                  {"hcb_kernel", cfg.net.hcb_kernel},
                  {"mdc_kernel", cfg.net.mdc_kernel},
                  {"dilations", cfg.net.dilations},
                  {"final_time_kernel", cfg.net.final_time_kernel},
                  {"leaky_slope", cfg.net.leaky_slope}};
  j["metrics"] = {{"f_floor", cfg.pitch.f_floor},
                  {"f_ceil", cfg.pitch.f_ceil},
                  {"pitch_frame_size", cfg.pitch.frame_size},
                  {"pitch_hop_size", cfg.pitch.hop_size},
                  {"voicing_threshold", cfg.pitch.voicing_threshold},
                  {"silence_rms", cfg.pitch.silence_rms},
                  {"mcd_fft_size", cfg.cepstrum.fft_size},
                  {"mcd_hop_size", cfg.cepstrum.hop_size},
                  {"mel_bands", cfg.cepstrum.mel_bands},
                  {"cepstral_coefficients", cfg.cepstrum.coefficients}};
  return j.dump(2);
}

} // namespace harmonika
