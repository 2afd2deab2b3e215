#include "harmonika/audio.hpp"

#include "harmonika/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>

namespace harmonika {

AudioBuffer::AudioBuffer(std::vector<double> samples, double sample_rate)
    : samples_(std::move(samples)), sample_rate_(sample_rate) {
  if (!(sample_rate_ > 0.0) || !std::isfinite(sample_rate_)) {
    throw ConfigError("sample rate must be positive, got " +
                      std::to_string(sample_rate_));
  }
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (!std::isfinite(samples_[i])) {
      throw ConfigError("non-finite sample at index " + std::to_string(i));
    }
  }
}

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
}

struct FmtInfo {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

} // namespace

AudioBuffer load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open WAV file: " + path.string());
  }
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                         std::istreambuf_iterator<char>()};
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("not a RIFF/WAVE file: " + path.string());
  }

  FmtInfo fmt;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t chunk_size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t available = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (chunk_size < 16 || available < 16) {
        throw FormatError("truncated fmt chunk in " + path.string());
      }
      const unsigned char* f = bytes.data() + body;
      fmt.format = read_u16(f);
      fmt.channels = read_u16(f + 2);
      fmt.sample_rate = read_u32(f + 4);
      fmt.block_align = read_u16(f + 12);
      fmt.bits = read_u16(f + 14);
      if (fmt.format == kFormatExtensible) {
        if (chunk_size < 40 || available < 40) {
          throw FormatError("truncated WAVE_FORMAT_EXTENSIBLE header in " +
                            path.string());
        }
        // The first two bytes of the sub-format GUID carry the real tag.
        fmt.format = read_u16(f + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      // Streaming writers sometimes leave the size unset; clamp to the file.
      data_size = std::min<std::size_t>(chunk_size, available);
      break;
    }
    pos = body + chunk_size + (chunk_size & 1U);
  }

  if (!have_fmt) {
    throw FormatError("missing fmt chunk in " + path.string());
  }
  if (data == nullptr) {
    throw FormatError("missing data chunk in " + path.string());
  }
  if (fmt.channels == 0 || fmt.sample_rate == 0) {
    throw FormatError("invalid channel count or sample rate in " +
                      path.string());
  }

  const bool pcm16 = fmt.format == kFormatPcm && fmt.bits == 16;
  const bool f32 = fmt.format == kFormatFloat && fmt.bits == 32;
  if (!pcm16 && !f32) {
    throw UnsupportedError("unsupported WAV encoding (format tag " +
                           std::to_string(fmt.format) + ", " +
                           std::to_string(fmt.bits) + " bits) in " +
                           path.string());
  }

  const std::size_t bytes_per_sample = fmt.bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * fmt.channels;
  const std::size_t frames = data_size / frame_bytes;
  std::vector<double> samples(frames, 0.0);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < fmt.channels; ++c) {
      const unsigned char* p = data + i * frame_bytes + c * bytes_per_sample;
      if (pcm16) {
        acc += static_cast<std::int16_t>(read_u16(p)) / 32768.0;
      } else {
        acc += std::bit_cast<float>(read_u32(p));
      }
    }
    samples[i] = acc / fmt.channels;
  }
  return AudioBuffer(std::move(samples), static_cast<double>(fmt.sample_rate));
}

void save_wav(const std::filesystem::path& path, const AudioBuffer& buf,
              WavEncoding encoding) {
  const std::uint32_t rate =
      static_cast<std::uint32_t>(std::lround(buf.sample_rate()));
  const std::uint16_t bits = encoding == WavEncoding::pcm16 ? 16 : 32;
  const std::uint16_t tag =
      encoding == WavEncoding::pcm16 ? kFormatPcm : kFormatFloat;
  const std::uint16_t block_align = bits / 8;
  const auto data_bytes =
      static_cast<std::uint32_t>(buf.size() * block_align);

  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, tag);
  put_u16(out, 1);
  put_u32(out, rate);
  put_u32(out, rate * block_align);
  put_u16(out, block_align);
  put_u16(out, bits);
  out += "data";
  put_u32(out, data_bytes);
  for (double s : buf.samples()) {
    if (encoding == WavEncoding::pcm16) {
      const double scaled = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
      put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
    } else {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(s)));
    }
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw FormatError("cannot write WAV file: " + path.string());
  }
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

namespace {

// Zero crossings of the interpolation kernel on each side, measured at the
// lower of the two rates.
constexpr int kSincZeroCrossings = 32;
constexpr double kKaiserBeta = 8.6;

constexpr std::size_t kKaiserTableSize = 8192;

// Kaiser window sampled on [0, 1]; evaluated by linear interpolation.
class KaiserTable {
public:
  KaiserTable() : table_(kKaiserTableSize + 1) {
    const double i0_beta = std::cyl_bessel_i(0.0, kKaiserBeta);
    for (std::size_t i = 0; i <= kKaiserTableSize; ++i) {
      const double x = static_cast<double>(i) / kKaiserTableSize;
      const double arg = kKaiserBeta * std::sqrt(std::max(0.0, 1.0 - x * x));
      table_[i] = std::cyl_bessel_i(0.0, arg) / i0_beta;
    }
  }

  double operator()(double x) const {
    const double pos = std::min(std::abs(x), 1.0) * kKaiserTableSize;
    const auto i = std::min(static_cast<std::size_t>(pos), kKaiserTableSize - 1);
    const double frac = pos - static_cast<double>(i);
    return table_[i] + frac * (table_[i + 1] - table_[i]);
  }

private:
  std::vector<double> table_;
};

} // namespace

AudioBuffer resample(const AudioBuffer& buf, double target_rate) {
  if (!(target_rate > 0.0)) {
    throw ConfigError("target sample rate must be positive");
  }
  if (target_rate == buf.sample_rate()) {
    return buf;
  }
  const double ratio = target_rate / buf.sample_rate();
  const double cutoff = std::min(1.0, ratio);
  const double half_width = kSincZeroCrossings / cutoff;  // in input samples
  static const KaiserTable kaiser;

  const auto& x = buf.samples();
  const auto n_in = static_cast<std::ptrdiff_t>(x.size());
  const auto n_out = static_cast<std::size_t>(
      std::llround(static_cast<double>(x.size()) * ratio));
  std::vector<double> y(n_out, 0.0);

  for (std::size_t m = 0; m < n_out; ++m) {
    const double t = static_cast<double>(m) / ratio;
    const auto lo = std::max<std::ptrdiff_t>(
        0, static_cast<std::ptrdiff_t>(std::ceil(t - half_width)));
    const auto hi = std::min<std::ptrdiff_t>(
        n_in - 1, static_cast<std::ptrdiff_t>(std::floor(t + half_width)));
    double acc = 0.0;
    double norm = 0.0;
    for (std::ptrdiff_t n = lo; n <= hi; ++n) {
      const double d = t - static_cast<double>(n);
      const double arg = std::numbers::pi * cutoff * d;
      const double sinc = d == 0.0 ? 1.0 : std::sin(arg) / arg;
      const double w = cutoff * sinc * kaiser(d / half_width);
      acc += w * x[static_cast<std::size_t>(n)];
      norm += w;
    }
    // Normalizing by the kernel sum keeps DC exact, including near the edges
    // where the kernel is truncated.
    y[m] = norm != 0.0 ? acc / norm : 0.0;
  }
  return AudioBuffer(std::move(y), target_rate);
}

} // namespace harmonika
