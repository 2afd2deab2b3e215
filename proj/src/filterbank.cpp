#include "harmonika/filterbank.hpp"

#include "harmonika/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <string>

namespace harmonika {

namespace {

constexpr double kErbSlope = 0.1079;
constexpr double kErbOffset = 24.7;

// Base frequencies are rounded to 46 significant bits so that h * f is exact
// for every order up to 127: the harmonic slices are true multiples.
constexpr int kBaseMantissaBits = 46;
constexpr std::size_t kMaxHarmonics = 127;

double round_mantissa(double x) {
  int e = 0;
  const double m = std::frexp(x, &e);
  return std::ldexp(std::round(std::ldexp(m, kBaseMantissaBits)), e - kBaseMantissaBits);
}

double unscaled_bandwidth(double order, double center_hz) {
  return kErbSlope * order * center_hz + kErbOffset;
}

struct Tap {
  std::size_t bin;
  double weight;
  double dweight;  // d weight / d gamma*
};

// Non-zero triangle samples of filter (slice, bin) on the STFT bin grid.
std::vector<Tap> filter_taps(const HarmonicFilterBank& bank, std::size_t slice,
                             std::size_t bin, double bin_hz, std::size_t fft_bins) {
  const double c = bank.center(slice, bin);
  const double a = unscaled_bandwidth(bank.harmonic_orders()[slice], bank.base_center(bin));
  const double g = std::max(bank.gamma_of_slice(slice), 1.0);
  const double bw = a / g;
  const double lo_f = c - bw / 2.0;
  const double hi_f = c + bw / 2.0;
  const auto lo = static_cast<std::ptrdiff_t>(std::max(0.0, std::ceil(lo_f / bin_hz)));
  const auto hi = std::min(static_cast<std::ptrdiff_t>(fft_bins) - 1,
                           static_cast<std::ptrdiff_t>(std::floor(hi_f / bin_hz)));
  std::vector<Tap> taps;
  for (std::ptrdiff_t b = lo; b <= hi; ++b) {
    const double dist = std::abs(static_cast<double>(b) * bin_hz - c);
    const double w = 1.0 - 2.0 * dist / bw;
    if (w > 0.0) {
      taps.push_back({static_cast<std::size_t>(b), w, -2.0 * dist / a});
    }
  }
  return taps;
}

void check_layout(const HarmonicFilterBank& bank, const MagnitudeSpectrogram& mag) {
  if (mag.sample_rate != bank.config().sample_rate) {
    throw ConfigError("spectrogram sample rate " + std::to_string(mag.sample_rate) +
                      " Hz does not match filter bank rate " +
                      std::to_string(bank.config().sample_rate) + " Hz");
  }
  if (mag.fft_size == 0 || mag.bins != mag.fft_size / 2 + 1 ||
      mag.values.size() != mag.bins * mag.frames) {
    throw SizeError("inconsistent magnitude spectrogram layout");
  }
}

} // namespace

double HarmonicBankConfig::f_max() const {
  return sample_rate / (2.0 * static_cast<double>(num_harmonics));
}

void HarmonicBankConfig::validate() const {
  if (!(f_min > 0.0)) throw ConfigError("f_min must be positive");
  if (bins_per_octave == 0) throw ConfigError("bins_per_octave must be >= 1");
  if (num_harmonics == 0) throw ConfigError("num_harmonics must be >= 1");
  if (num_harmonics > kMaxHarmonics) {
    throw ConfigError("num_harmonics must be <= " + std::to_string(kMaxHarmonics));
  }
  if (!(sample_rate > 0.0)) throw ConfigError("sample_rate must be positive");
  if (!(f_max() > f_min)) {
    throw ConfigError("f_max = f_s/(2H) = " + std::to_string(f_max()) +
                      " Hz must exceed f_min = " + std::to_string(f_min) + " Hz");
  }
}

double harmonic_bandwidth(double order, double center_hz, double gamma) {
  return unscaled_bandwidth(order, center_hz) / std::max(gamma, 1.0);
}

HarmonicFilterBank HarmonicFilterBank::build(const HarmonicBankConfig& cfg) {
  cfg.validate();
  const double b = static_cast<double>(cfg.bins_per_octave);
  const auto num_bins = static_cast<std::size_t>(std::floor(b * std::log2(cfg.f_max() / cfg.f_min)));
  if (num_bins == 0) {
    throw ConfigError("harmonic range shorter than one bin; raise bins_per_octave");
  }

  HarmonicFilterBank bank;
  bank.cfg_ = cfg;
  bank.base_.resize(num_bins);
  for (std::size_t k = 0; k < num_bins; ++k) {
    bank.base_[k] = round_mantissa(cfg.f_min * std::exp2(static_cast<double>(k) / b));
  }
  if (cfg.include_half) bank.orders_.push_back(0.5);
  for (std::size_t h = 1; h <= cfg.num_harmonics; ++h) {
    bank.orders_.push_back(static_cast<double>(h));
  }
  bank.gamma_.assign(cfg.per_slice_gamma ? bank.orders_.size() : 1, 1.0);
  return bank;
}

std::size_t HarmonicFilterBank::slice_of(double order) const {
  const auto it = std::find(orders_.begin(), orders_.end(), order);
  if (it == orders_.end()) {
    throw ConfigError("harmonic order " + std::to_string(order) + " not in bank");
  }
  return static_cast<std::size_t>(it - orders_.begin());
}

HarmonicFilterBank HarmonicFilterBank::with_gamma(std::vector<double> gamma) const {
  if (gamma.size() != gamma_.size()) {
    throw SizeError("expected " + std::to_string(gamma_.size()) + " gamma value(s), got " +
                    std::to_string(gamma.size()));
  }
  for (double g : gamma) {
    if (!std::isfinite(g)) throw ConfigError("gamma must be finite");
  }
  HarmonicFilterBank copy = *this;
  copy.gamma_ = std::move(gamma);
  return copy;
}

double HarmonicFilterBank::bandwidth(double order, double f_c) const {
  if (!(f_c > 0.0)) throw ConfigError("center frequency must be positive");
  const double g = gamma_.size() == 1 ? gamma_[0] : gamma_[slice_of(order)];
  return harmonic_bandwidth(order, f_c, g);
}

double HarmonicFilterBank::bandwidth_at(std::size_t slice, std::size_t bin) const {
  return harmonic_bandwidth(orders_[slice], base_[bin], gamma_of_slice(slice));
}

double HarmonicFilterBank::filter_response(std::size_t slice, std::size_t bin, double f) const {
  const double w = 1.0 - 2.0 * std::abs(f - center(slice, bin)) / bandwidth_at(slice, bin);
  return std::max(w, 0.0);
}

std::vector<NyquistViolation> HarmonicFilterBank::nyquist_violations() const {
  std::vector<NyquistViolation> out;
  const double nyquist = cfg_.sample_rate / 2.0;
  for (std::size_t s = 0; s < num_slices(); ++s) {
    for (std::size_t k = 0; k < num_bins(); ++k) {
      const double edge = center(s, k) + harmonic_bandwidth(orders_[s], base_[k], 1.0) / 2.0;
      if (edge > nyquist) out.push_back({s, k, edge});
    }
  }
  return out;
}

MagnitudeSpectrogram MagnitudeSpectrogram::from(const ComplexSpectrogram& spec) {
  return {spec.bins(), spec.frames(), spec.sample_rate(), spec.fft_size(),
          spec.hop_size(), spec.magnitude()};
}

HarmonicTensor project(const HarmonicFilterBank& bank, const MagnitudeSpectrogram& mag) {
  check_layout(bank, mag);
  const std::size_t slices = bank.num_slices();
  const std::size_t bins = bank.num_bins();
  const std::size_t frames = mag.frames;
  HarmonicTensor out;
  out.values = Tensor3(slices, bins, frames);
  out.harmonic_orders = bank.harmonic_orders();
  out.frame_hop_s = static_cast<double>(mag.hop_size) / mag.sample_rate;

  for (std::size_t s = 0; s < slices; ++s) {
    for (std::size_t k = 0; k < bins; ++k) {
      const auto taps = filter_taps(bank, s, k, mag.bin_hz(), mag.bins);
      for (std::size_t t = 0; t < frames; ++t) {
        const double* row = &mag.values[t * mag.bins];
        double acc = 0.0;
        for (const Tap& tap : taps) acc += tap.weight * row[tap.bin];
        out.values(s, k, t) = bank.config().log_compress ? std::log1p(acc) : acc;
      }
    }
  }
  return out;
}

HarmonicTensor project(const HarmonicFilterBank& bank, const ComplexSpectrogram& spec) {
  return project(bank, MagnitudeSpectrogram::from(spec));
}

std::vector<double> gamma_gradient(const HarmonicFilterBank& bank,
                                   const MagnitudeSpectrogram& mag,
                                   const Tensor3& upstream) {
  check_layout(bank, mag);
  if (upstream.channels() != bank.num_slices() || upstream.rows() != bank.num_bins() ||
      upstream.cols() != mag.frames) {
    throw SizeError("upstream gradient shape " + upstream.shape_string() +
                    " does not match harmonic tensor shape");
  }
  std::vector<double> grad(bank.gamma().size(), 0.0);
  const bool log_compress = bank.config().log_compress;
  for (std::size_t s = 0; s < bank.num_slices(); ++s) {
    // At gamma == 1 the pass-through branch is taken.
    if (bank.gamma_of_slice(s) < 1.0) continue;
    double slice_grad = 0.0;
    for (std::size_t k = 0; k < bank.num_bins(); ++k) {
      const auto taps = filter_taps(bank, s, k, mag.bin_hz(), mag.bins);
      if (taps.empty()) continue;
      for (std::size_t t = 0; t < mag.frames; ++t) {
        const double up = upstream(s, k, t);
        if (up == 0.0) continue;
        const double* row = &mag.values[t * mag.bins];
        double dv = 0.0;
        double v = 0.0;
        for (const Tap& tap : taps) {
          dv += tap.dweight * row[tap.bin];
          v += tap.weight * row[tap.bin];
        }
        if (log_compress) dv /= 1.0 + v;
        slice_grad += up * dv;
      }
    }
    grad[grad.size() == 1 ? 0 : s] += slice_grad;
  }
  return grad;
}

std::vector<double> gamma_gradient(const HarmonicFilterBank& bank,
                                   const ComplexSpectrogram& spec,
                                   const Tensor3& upstream) {
  return gamma_gradient(bank, MagnitudeSpectrogram::from(spec), upstream);
}

void dump_bank_json(const HarmonicFilterBank& bank, const std::filesystem::path& path) {
  const auto& cfg = bank.config();
  nlohmann::ordered_json centers = nlohmann::ordered_json::array();
  for (std::size_t s = 0; s < bank.num_slices(); ++s) {
    std::vector<double> row(bank.num_bins());
    for (std::size_t k = 0; k < bank.num_bins(); ++k) row[k] = bank.center(s, k);
    centers.push_back({{"order", bank.harmonic_orders()[s]}, {"centers_hz", row}});
  }
  nlohmann::ordered_json j;
  j["f_min"] = cfg.f_min;
  j["B"] = cfg.bins_per_octave;
  j["H"] = cfg.num_harmonics;
  j["include_half"] = cfg.include_half;
  if (bank.gamma().size() == 1) {
    j["gamma"] = bank.gamma()[0];
  } else {
    j["gamma"] = bank.gamma();
  }
  j["num_bins"] = bank.num_bins();
  j["sample_rate"] = cfg.sample_rate;
  j["centers"] = std::move(centers);

  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void dump_bank_csv(const HarmonicFilterBank& bank, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "slice,order,bin,center_hz,bandwidth_hz\n";
  char line[160];
  for (std::size_t s = 0; s < bank.num_slices(); ++s) {
    for (std::size_t k = 0; k < bank.num_bins(); ++k) {
      std::snprintf(line, sizeof line, "%zu,%g,%zu,%.10g,%.10g\n", s,
                    bank.harmonic_orders()[s], k, bank.center(s, k), bank.bandwidth_at(s, k));
      out << line;
    }
  }
}

void write_tensor_f32(const HarmonicTensor& tensor, const std::filesystem::path& path) {
  const auto& v = tensor.values.data();
  std::string bytes;
  bytes.reserve(v.size() * 4);
  for (double x : v) {
    auto u = std::bit_cast<std::uint32_t>(static_cast<float>(x));
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));

  nlohmann::ordered_json side;
  side["dtype"] = "float32";
  side["endianness"] = "little";
  side["order"] = "slice,bin,frame";
  side["shape"] = {tensor.values.channels(), tensor.values.rows(), tensor.values.cols()};
  side["harmonic_orders"] = tensor.harmonic_orders;
  side["hop_s"] = tensor.frame_hop_s;
  std::ofstream js(path.string() + ".json");
  js << side.dump(2) << '\n';
}

HarmonicTensor read_tensor_f32(const std::filesystem::path& path) {
  std::ifstream js(path.string() + ".json");
  if (!js) throw FormatError("missing tensor sidecar " + path.string() + ".json");
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(js);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad tensor sidecar: ") + e.what());
  }
  const auto shape = side.at("shape").get<std::vector<std::size_t>>();
  if (shape.size() != 3) throw FormatError("tensor sidecar shape must have 3 entries");

  HarmonicTensor t;
  t.values = Tensor3(shape[0], shape[1], shape[2]);
  t.harmonic_orders = side.at("harmonic_orders").get<std::vector<double>>();
  t.frame_hop_s = side.at("hop_s").get<double>();

  std::ifstream in(path, std::ios::binary);
  std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (bytes.size() != t.values.size() * 4) {
    throw FormatError("tensor payload size does not match sidecar shape");
  }
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) {
      u |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + b])) << (8 * b);
    }
    t.values.data()[i] = std::bit_cast<float>(u);
  }
  return t;
}

void write_tensor_csv(const HarmonicTensor& tensor, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  const auto& v = tensor.values;
  char buf[32];
  for (std::size_t s = 0; s < v.channels(); ++s) {
    for (std::size_t k = 0; k < v.rows(); ++k) {
      for (std::size_t t = 0; t < v.cols(); ++t) {
        std::snprintf(buf, sizeof buf, "%.9g", v(s, k, t));
        out << (t ? "," : "") << buf;
      }
      out << '\n';
    }
  }
}

} // namespace harmonika
