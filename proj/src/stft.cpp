#include "harmonika/stft.hpp"

#include "harmonika/error.hpp"

#include <fftw3.h>
#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

namespace harmonika {

WindowType parse_window(std::string_view name) {
  if (name == "hann") return WindowType::hann;
  if (name == "rectangular") return WindowType::rectangular;
  throw ConfigError("unknown window type: " + std::string(name));
}

std::string_view to_string(WindowType w) {
  return w == WindowType::hann ? "hann" : "rectangular";
}

void StftConfig::validate() const {
  if (fft_size == 0 || !std::has_single_bit(fft_size)) {
    throw ConfigError("fft_size must be a power of two, got " +
                      std::to_string(fft_size));
  }
  if (hop_size == 0 || hop_size > fft_size) {
    throw ConfigError("hop_size must satisfy 0 < hop <= fft_size");
  }
}

std::vector<double> make_window(WindowType type, std::size_t length) {
  std::vector<double> w(length, 1.0);
  if (type == WindowType::hann) {
    for (std::size_t n = 0; n < length; ++n) {
      w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                  static_cast<double>(length));
    }
  }
  return w;
}

ComplexSpectrogram::ComplexSpectrogram(std::size_t bins, std::size_t frames,
                                       double sample_rate, std::size_t fft_size,
                                       std::size_t hop_size)
    : bins_(bins), frames_(frames), sample_rate_(sample_rate),
      fft_size_(fft_size), hop_size_(hop_size), values_(bins * frames) {}

std::vector<double> ComplexSpectrogram::magnitude() const {
  std::vector<double> mag(values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i) {
    mag[i] = std::abs(values_[i]);
  }
  return mag;
}

namespace {

// The FFTW planner is not re-entrant; execution of an existing plan is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};

class RealFft {
public:
  explicit RealFft(std::size_t n)
      : n_(n),
        in_(static_cast<double*>(fftw_malloc(sizeof(double) * n))),
        out_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)))) {
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_.get(),
                                 reinterpret_cast<fftw_complex*>(out_.get()),
                                 FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_.get(); }
  void execute(std::complex<double>* dst) {
    fftw_execute(plan_);
    const auto* src = reinterpret_cast<const fftw_complex*>(out_.get());
    for (std::size_t k = 0; k <= n_ / 2; ++k) {
      dst[k] = {src[k][0], src[k][1]};
    }
  }

private:
  std::size_t n_;
  std::unique_ptr<double, FftwDeleter> in_;
  std::unique_ptr<void, FftwDeleter> out_;
  fftw_plan plan_ = nullptr;
};

// Reflect without repeating the edge sample (numpy "reflect").
double reflected(const std::vector<double>& x, std::ptrdiff_t i) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  if (n == 1) return x[0];
  const std::ptrdiff_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  if (i >= n) i = period - i;
  return x[static_cast<std::size_t>(i)];
}

} // namespace

std::size_t stft_frame_count(std::size_t n, const StftConfig& cfg) {
  if (cfg.center) {
    return 1 + n / cfg.hop_size;
  }
  return n < cfg.fft_size ? 0 : 1 + (n - cfg.fft_size) / cfg.hop_size;
}

ComplexSpectrogram stft(const AudioBuffer& buf, const StftConfig& cfg) {
  cfg.validate();
  const std::size_t n_fft = cfg.fft_size;
  if (buf.size() < n_fft) {
    throw SizeError("buffer of " + std::to_string(buf.size()) +
                    " samples is shorter than fft_size " + std::to_string(n_fft));
  }
  const auto& x = buf.samples();
  const std::size_t frames = stft_frame_count(x.size(), cfg);
  const std::size_t bins = n_fft / 2 + 1;
  const auto window = make_window(cfg.window, n_fft);
  const auto offset = cfg.center ? static_cast<std::ptrdiff_t>(n_fft / 2) : 0;

  ComplexSpectrogram spec(bins, frames, buf.sample_rate(), n_fft, cfg.hop_size);
  RealFft fft(n_fft);
  double* in = fft.input();
  for (std::size_t t = 0; t < frames; ++t) {
    const auto start = static_cast<std::ptrdiff_t>(t * cfg.hop_size) - offset;
    for (std::size_t n = 0; n < n_fft; ++n) {
      in[n] = reflected(x, start + static_cast<std::ptrdiff_t>(n)) * window[n];
    }
    fft.execute(spec.frame_data(t));
  }
  return spec;
}

void dump_spectrogram_csv(const ComplexSpectrogram& spec,
                          const std::filesystem::path& csv_path) {
  std::ofstream csv(csv_path);
  if (!csv) {
    throw FormatError("cannot write " + csv_path.string());
  }
  char buf[32];
  for (std::size_t t = 0; t < spec.frames(); ++t) {
    const auto* row = spec.frame_data(t);
    for (std::size_t k = 0; k < spec.bins(); ++k) {
      std::snprintf(buf, sizeof buf, "%.9g", std::abs(row[k]));
      csv << (k ? "," : "") << buf;
    }
    csv << '\n';
  }

  const nlohmann::ordered_json side = {{"bins", spec.bins()},
                                       {"frames", spec.frames()},
                                       {"bin_hz", spec.bin_hz()},
                                       {"hop_s", spec.frame_hop_s()}};
  std::ofstream js(csv_path.string() + ".json");
  js << side.dump(2) << '\n';
}

} // namespace harmonika
