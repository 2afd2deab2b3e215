#include "helpers.hpp"

#include "harmonika/error.hpp"
#include "harmonika/stft.hpp"

#include <doctest.h>

#include <complex>
#include <numbers>

using namespace harmonika;

namespace {

// Textbook O(N^2) DFT of one windowed frame.
std::vector<std::complex<double>> naive_dft(const std::vector<double>& frame) {
  const std::size_t n = frame.size();
  std::vector<std::complex<double>> out(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k * i % n) / static_cast<double>(n);
      acc += frame[i] * std::complex<double>(std::cos(a), std::sin(a));
    }
    out[k] = acc;
  }
  return out;
}

} // namespace

TEST_CASE("config validation and window parsing") {
  StftConfig c;
  CHECK_NOTHROW(c.validate());
  c.fft_size = 1000;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.hop_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.hop_size = 4096;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(parse_window("hann") == WindowType::hann);
  CHECK(parse_window("rectangular") == WindowType::rectangular);
  CHECK_THROWS_AS(parse_window("kaiser"), ConfigError);
}

TEST_CASE("periodic Hann window") {
  const auto w = make_window(WindowType::hann, 8);
  CHECK(w[0] == 0.0);
  CHECK(w[4] == doctest::Approx(1.0));
  CHECK(w[2] == doctest::Approx(0.5));
  CHECK(w[6] == doctest::Approx(0.5));
  CHECK(w[1] == doctest::Approx(w[7]));
}

TEST_CASE("frame count follows reflect-padded framing") {
  StftConfig c;
  CHECK(stft_frame_count(24000, c) == 94);
  CHECK(stft_frame_count(2048, c) == 9);
  CHECK(stft_frame_count(2049, c) == 9);
  c.center = false;
  CHECK(stft_frame_count(2048, c) == 1);
  CHECK(stft_frame_count(2048 + 256, c) == 2);
}

TEST_CASE("sine on an exact bin with a rectangular window gives N/2") {
  StftConfig c;
  c.fft_size = 256;
  c.hop_size = 64;
  c.window = WindowType::rectangular;
  const double fs = 8000.0;
  const std::size_t bin = 16;
  const auto x = testing::tone(bin * fs / 256.0, 0.25, fs, 1.0);
  const ComplexSpectrogram s = stft(x, c);
  // Interior frames contain only unpadded samples.
  for (std::size_t t = 3; t + 3 < s.frames(); ++t) {
    CHECK(std::abs(s.at(bin, t)) == doctest::Approx(128.0).epsilon(1e-9));
    CHECK(std::abs(s.at(bin + 3, t)) < 1e-8);
    CHECK(std::abs(s.at(0, t)) < 1e-8);
  }
}

TEST_CASE("stft matches a naive DFT of the padded frame") {
  StftConfig c;
  c.fft_size = 64;
  c.hop_size = 16;
  const auto x = testing::noise(300, 7, 16000.0);
  const ComplexSpectrogram s = stft(x, c);
  REQUIRE(s.frames() == 1 + 300 / 16);
  REQUIRE(s.bins() == 33);

  // Reflect padding without repeating the edge sample.
  const auto& v = x.samples();
  auto at = [&](long i) {
    const long n = static_cast<long>(v.size());
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
    return v[static_cast<std::size_t>(i)];
  };
  const auto w = make_window(WindowType::hann, 64);
  for (std::size_t t : {0UL, 5UL, s.frames() - 1}) {
    std::vector<double> frame(64);
    for (std::size_t i = 0; i < 64; ++i) {
      frame[i] = w[i] * at(static_cast<long>(t * 16 + i) - 32);
    }
    const auto ref = naive_dft(frame);
    for (std::size_t k = 0; k < 33; ++k) {
      CHECK(std::abs(s.at(k, t) - ref[k]) < 1e-10);
    }
  }
}

TEST_CASE("Parseval holds per frame") {
  StftConfig c;
  c.fft_size = 512;
  c.hop_size = 128;
  c.window = WindowType::rectangular;
  c.center = false;
  const auto x = testing::noise(512 * 3, 11);
  const ComplexSpectrogram s = stft(x, c);
  for (std::size_t t = 0; t < s.frames(); ++t) {
    double time_energy = 0.0;
    for (std::size_t i = 0; i < 512; ++i) {
      const double v = x.samples()[t * 128 + i];
      time_energy += v * v;
    }
    double freq_energy = std::norm(s.at(0, t)) + std::norm(s.at(256, t));
    for (std::size_t k = 1; k < 256; ++k) freq_energy += 2.0 * std::norm(s.at(k, t));
    CHECK(freq_energy / 512.0 == doctest::Approx(time_energy).epsilon(1e-10));
  }
}

TEST_CASE("stft is linear") {
  StftConfig c;
  c.fft_size = 128;
  c.hop_size = 32;
  const auto a = testing::noise(700, 1);
  const auto b = testing::noise(700, 2);
  std::vector<double> mix(700);
  for (std::size_t i = 0; i < 700; ++i) mix[i] = 2.0 * a.samples()[i] - 0.5 * b.samples()[i];
  const auto sa = stft(a, c);
  const auto sb = stft(b, c);
  const auto sm = stft(AudioBuffer(mix, 24000.0), c);
  for (std::size_t t = 0; t < sm.frames(); ++t) {
    for (std::size_t k = 0; k < sm.bins(); ++k) {
      CHECK(std::abs(sm.at(k, t) - (2.0 * sa.at(k, t) - 0.5 * sb.at(k, t))) < 1e-11);
    }
  }
}

TEST_CASE("a shift by one hop shifts the frames") {
  StftConfig c;
  c.fft_size = 128;
  c.hop_size = 32;
  const auto x = testing::noise(1000, 3);
  std::vector<double> shifted(x.samples().begin() + 32, x.samples().end());
  const auto s0 = stft(x, c);
  const auto s1 = stft(AudioBuffer(shifted, 24000.0), c);
  // Skip frames that touch the padded edges.
  for (std::size_t t = 3; t + 6 < s1.frames(); ++t) {
    for (std::size_t k = 0; k < s1.bins(); ++k) {
      CHECK(std::abs(s1.at(k, t) - s0.at(k, t + 1)) < 1e-11);
    }
  }
}

TEST_CASE("short input is rejected") {
  const auto x = testing::noise(100, 1);
  CHECK_THROWS_AS(stft(x, StftConfig{}), SizeError);
}

TEST_CASE("spectrogram dump writes CSV and sidecar") {
  auto dir = testing::scratch_dir("stft_dump");
  StftConfig c;
  c.fft_size = 64;
  c.hop_size = 32;
  const auto s = stft(testing::noise(256, 4), c);
  dump_spectrogram_csv(s, dir / "s.csv");
  CHECK(std::filesystem::exists(dir / "s.csv"));
  const std::string side = testing::slurp(dir / "s.csv.json");
  CHECK(side.find("\"bins\": 33") != std::string::npos);
}
