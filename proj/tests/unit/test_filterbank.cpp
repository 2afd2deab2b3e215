#include "helpers.hpp"

#include "harmonika/error.hpp"
#include "harmonika/filterbank.hpp"
#include "harmonika/stft.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace harmonika;

namespace {

HarmonicBankConfig small_config() {
  HarmonicBankConfig c;
  c.sample_rate = 8000.0;
  c.f_min = 100.0;
  c.bins_per_octave = 4;
  c.num_harmonics = 2;
  return c;
}

MagnitudeSpectrogram random_mag(double fs, std::size_t fft, std::size_t frames, unsigned seed) {
  MagnitudeSpectrogram m;
  m.bins = fft / 2 + 1;
  m.frames = frames;
  m.sample_rate = fs;
  m.fft_size = fft;
  m.hop_size = fft / 4;
  m.values.resize(m.bins * frames);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : m.values) v = u(rng);
  return m;
}

// Independent evaluation of the projection straight from the bank geometry.
double brute_projection(double fs, double order, double fc, double gamma,
                        const MagnitudeSpectrogram& m, std::size_t t) {
  const double bw = (0.1079 * order * fc + 24.7) / std::max(gamma, 1.0);
  double acc = 0.0;
  for (std::size_t b = 0; b < m.bins; ++b) {
    const double f = static_cast<double>(b) * fs / static_cast<double>(m.fft_size);
    const double w = std::max(0.0, 1.0 - 2.0 * std::abs(f - order * fc) / bw);
    acc += w * m.values[t * m.bins + b];
  }
  return acc;
}

} // namespace

TEST_CASE("default bank dimensions") {
  const auto bank = HarmonicFilterBank::build(HarmonicBankConfig{});
  CHECK(bank.config().f_max() == 1200.0);
  CHECK(bank.num_bins() == static_cast<std::size_t>(std::floor(24.0 * std::log2(1200.0 / 32.7))));
  CHECK(bank.num_bins() == 124);
  CHECK(bank.num_slices() == 11);
  const std::vector<double> orders{0.5, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  CHECK(bank.harmonic_orders() == orders);
  CHECK(bank.gamma() == std::vector<double>{1.0});
  CHECK(bank.center(bank.slice_of(1.0), 24) == doctest::Approx(65.4).epsilon(1e-12));
  CHECK(bank.base_center(0) == doctest::Approx(32.7).epsilon(1e-12));
  CHECK_THROWS_AS(bank.slice_of(11.0), ConfigError);
}

TEST_CASE("bank config errors") {
  HarmonicBankConfig c;
  c.f_min = 1200.0;
  CHECK_THROWS_AS(HarmonicFilterBank::build(c), ConfigError);
  c = {};
  c.num_harmonics = 0;
  CHECK_THROWS_AS(HarmonicFilterBank::build(c), ConfigError);
  c = {};
  c.bins_per_octave = 0;
  CHECK_THROWS_AS(HarmonicFilterBank::build(c), ConfigError);
  c = {};
  c.num_harmonics = 2;
  c.include_half = false;
  CHECK(HarmonicFilterBank::build(c).num_slices() == 2);
}

TEST_CASE("centers are exact harmonic multiples") {
  for (std::size_t h : {3UL, 7UL, 10UL, 40UL}) {
    HarmonicBankConfig c;
    c.num_harmonics = h;
    c.f_min = 10.0;
    c.sample_rate = 48000.0;
    const auto bank = HarmonicFilterBank::build(c);
    const std::size_t one = bank.slice_of(1.0);
    for (std::size_t s = 0; s < bank.num_slices(); ++s) {
      for (std::size_t k = 0; k < bank.num_bins(); ++k) {
        REQUIRE(bank.center(s, k) / bank.center(one, k) == bank.harmonic_orders()[s]);
      }
    }
  }
}

TEST_CASE("bandwidth law") {
  CHECK(harmonic_bandwidth(1.0, 32.7, 1.0) == doctest::Approx(28.22833).epsilon(1e-9));
  CHECK(harmonic_bandwidth(2.0, 500.0, 2.0) == doctest::Approx(66.3).epsilon(1e-12));
  CHECK(harmonic_bandwidth(3.0, 200.0, 0.5) == harmonic_bandwidth(3.0, 200.0, 1.0));
  CHECK(harmonic_bandwidth(3.0, 200.0, 0.01) == harmonic_bandwidth(3.0, 200.0, 1.0));
  CHECK(harmonic_bandwidth(3.0, 200.0, 2.0) == doctest::Approx(0.5 * harmonic_bandwidth(3.0, 200.0, 1.0)));

  const auto bank = HarmonicFilterBank::build(HarmonicBankConfig{});
  CHECK(bank.bandwidth(1.0, 32.7) == doctest::Approx(28.228).epsilon(1e-4));
  CHECK(bank.with_gamma({2.0}).bandwidth(2.0, 500.0) == doctest::Approx(66.3));
  CHECK_THROWS_AS(bank.with_gamma({1.0, 2.0}), SizeError);

  // Monotone bandwidth and increasing relative resolution along h f_c.
  double prev_bw = 0.0;
  double prev_q = 0.0;
  for (std::size_t s = 0; s < bank.num_slices(); ++s) {
    for (std::size_t k = 0; k < bank.num_bins(); k += 7) {
      const double f = bank.center(s, k);
      if (s > 0 && f <= bank.center(s - 1, bank.num_bins() - 1)) continue;
      const double bw = bank.bandwidth_at(s, k);
      CHECK(bw > prev_bw);
      CHECK(f / bw > prev_q);
      prev_bw = bw;
      prev_q = f / bw;
    }
  }
}

TEST_CASE("triangle geometry") {
  const auto bank = HarmonicFilterBank::build(HarmonicBankConfig{}).with_gamma({1.7});
  std::mt19937 rng(5);
  std::uniform_int_distribution<std::size_t> ds(0, bank.num_slices() - 1);
  std::uniform_int_distribution<std::size_t> dk(0, bank.num_bins() - 1);
  for (int i = 0; i < 50; ++i) {
    const std::size_t s = ds(rng);
    const std::size_t k = dk(rng);
    const double c = bank.center(s, k);
    const double bw = bank.bandwidth_at(s, k);
    CHECK(bank.filter_response(s, k, c) == 1.0);
    CHECK(bank.filter_response(s, k, c + bw / 4) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(bank.filter_response(s, k, c - bw / 4) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(bank.filter_response(s, k, c + bw / 2) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(bank.filter_response(s, k, c + bw) == 0.0);
    CHECK(bank.filter_response(s, k, c - bw) == 0.0);
  }
}

TEST_CASE("nyquist edges at defaults") {
  // The highest filter of the top slice reaches past f_s/2 with the divisor at 1.
  const auto bank = HarmonicFilterBank::build(HarmonicBankConfig{});
  const auto v = bank.nyquist_violations();
  for (const auto& e : v) {
    const double edge = bank.center(e.slice, e.bin) + bank.bandwidth_at(e.slice, e.bin) / 2;
    CHECK(e.upper_edge_hz == doctest::Approx(edge));
    CHECK(edge > 12000.0);
  }
  // Coarser bins leave at least a whole bin of headroom below f_max.
  HarmonicBankConfig c;
  c.bins_per_octave = 12;
  CHECK(HarmonicFilterBank::build(c).nyquist_violations().empty());
}

TEST_CASE("projection matches a direct sum and is linear") {
  const auto bank = HarmonicFilterBank::build(small_config()).with_gamma({1.3});
  auto m = random_mag(8000.0, 256, 5, 9);
  const HarmonicTensor ht = project(bank, m);
  REQUIRE(ht.values.channels() == bank.num_slices());
  REQUIRE(ht.values.rows() == bank.num_bins());
  REQUIRE(ht.values.cols() == 5);
  for (std::size_t s = 0; s < bank.num_slices(); ++s) {
    for (std::size_t k = 0; k < bank.num_bins(); ++k) {
      for (std::size_t t = 0; t < 5; ++t) {
        const double want = brute_projection(8000.0, bank.harmonic_orders()[s],
                                             bank.base_center(k), 1.3, m, t);
        CHECK(ht.values(s, k, t) == doctest::Approx(want).epsilon(1e-12));
        CHECK(ht.values(s, k, t) >= 0.0);
      }
    }
  }

  auto scaled = m;
  for (auto& v : scaled.values) v *= 3.25;
  const HarmonicTensor hs = project(bank, scaled);
  for (std::size_t i = 0; i < hs.values.size(); ++i) {
    CHECK(std::abs(hs.values.data()[i] - 3.25 * ht.values.data()[i]) <=
          1e-9 * std::max(1.0, std::abs(hs.values.data()[i])));
  }

  for (auto& v : m.values) v = 0.0;
  const auto zero = project(bank, m);
  for (double v : zero.values.data()) CHECK(v == 0.0);

  m.sample_rate = 16000.0;
  CHECK_THROWS_AS(project(bank, m), ConfigError);
}

TEST_CASE("log compression") {
  auto cfg = small_config();
  cfg.log_compress = true;
  const auto logbank = HarmonicFilterBank::build(cfg);
  const auto linbank = HarmonicFilterBank::build(small_config());
  const auto m = random_mag(8000.0, 256, 3, 2);
  const auto a = project(logbank, m);
  const auto b = project(linbank, m);
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    CHECK(a.values.data()[i] == doctest::Approx(std::log1p(b.values.data()[i])));
  }
}

TEST_CASE("tone at f_min peaks at bin 0 of the fundamental slice") {
  // A finer STFT is needed to separate the 1/24-octave bins near 32.7 Hz.
  const auto bank = HarmonicFilterBank::build(HarmonicBankConfig{});
  StftConfig sc;
  sc.fft_size = 8192;
  const auto spec = stft(testing::tone(32.7, 2.0), sc);
  const auto ht = project(bank, spec);
  const std::size_t s = bank.slice_of(1.0);
  const std::size_t t = ht.values.cols() / 2;
  std::size_t best = 0;
  for (std::size_t k = 1; k < bank.num_bins(); ++k) {
    if (ht.values(s, k, t) > ht.values(s, best, t)) best = k;
  }
  CHECK(best == 0);
}

TEST_CASE("tone at 3 f_min peaks at bin 0 of slice 3") {
  const auto bank = HarmonicFilterBank::build(HarmonicBankConfig{});
  const auto spec = stft(testing::tone(3 * 32.7, 1.0), StftConfig{});
  const auto ht = project(bank, spec);
  const std::size_t s = bank.slice_of(3.0);
  // Frames within N/2 of either end see the reflected padding.
  const std::size_t edge = 2048 / 2 / 256;
  for (std::size_t t = edge; t + edge < ht.values.cols(); ++t) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < bank.num_bins(); ++k) {
      if (ht.values(s, k, t) > ht.values(s, best, t)) best = k;
    }
    INFO("frame " << t);
    CHECK(best == 0);
  }
}

TEST_CASE("gamma gradient") {
  const auto m = random_mag(8000.0, 256, 4, 21);
  const auto base = HarmonicFilterBank::build(small_config());
  Tensor3 up(base.num_slices(), base.num_bins(), 4);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : up.data()) v = u(rng);

  auto loss = [&](double g) {
    const auto ht = project(base.with_gamma({g}), m);
    double acc = 0.0;
    for (std::size_t i = 0; i < up.size(); ++i) acc += up.data()[i] * ht.values.data()[i];
    return acc;
  };
  const double eps = 1e-4;
  const double numeric = (loss(1.3 + eps) - loss(1.3 - eps)) / (2 * eps);
  const auto analytic = gamma_gradient(base.with_gamma({1.3}), m, up);
  REQUIRE(analytic.size() == 1);
  CHECK(std::abs(analytic[0] - numeric) / std::max(std::abs(numeric), 1e-6) < 1e-4);

  CHECK(gamma_gradient(base.with_gamma({0.5}), m, up)[0] == 0.0);
  Tensor3 zero(up.channels(), up.rows(), up.cols());
  CHECK(gamma_gradient(base.with_gamma({1.3}), m, zero)[0] == 0.0);
  CHECK_THROWS_AS(gamma_gradient(base, m, Tensor3(1, 1, 1)), SizeError);
}

TEST_CASE("per-slice gamma gradient") {
  auto cfg = small_config();
  cfg.per_slice_gamma = true;
  const auto base = HarmonicFilterBank::build(cfg);
  REQUIRE(base.gamma().size() == base.num_slices());
  const auto m = random_mag(8000.0, 256, 3, 8);
  Tensor3 up(base.num_slices(), base.num_bins(), 3, 0.0);
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : up.data()) v = u(rng);
  std::vector<double> g{1.2, 1.6, 2.1};
  const auto analytic = gamma_gradient(base.with_gamma(g), m, up);
  for (std::size_t s = 0; s < g.size(); ++s) {
    auto loss = [&](double delta) {
      auto gg = g;
      gg[s] += delta;
      const auto ht = project(base.with_gamma(gg), m);
      double acc = 0.0;
      for (std::size_t i = 0; i < up.size(); ++i) acc += up.data()[i] * ht.values.data()[i];
      return acc;
    };
    const double numeric = (loss(1e-4) - loss(-1e-4)) / 2e-4;
    CHECK(std::abs(analytic[s] - numeric) / std::max(std::abs(numeric), 1e-6) < 1e-4);
  }
}

TEST_CASE("tensor and bank dumps") {
  auto dir = testing::scratch_dir("bank_dump");
  const auto bank = HarmonicFilterBank::build(small_config());
  const auto ht = project(bank, random_mag(8000.0, 256, 4, 1));
  write_tensor_f32(ht, dir / "t.f32");
  const auto back = read_tensor_f32(dir / "t.f32");
  REQUIRE(back.values.same_shape(ht.values));
  CHECK(back.harmonic_orders == ht.harmonic_orders);
  CHECK(std::filesystem::file_size(dir / "t.f32") == 4 * ht.values.size());
  for (std::size_t i = 0; i < ht.values.size(); ++i) {
    CHECK(back.values.data()[i] == static_cast<double>(static_cast<float>(ht.values.data()[i])));
  }
  std::filesystem::resize_file(dir / "t.f32", 8);
  CHECK_THROWS_AS(read_tensor_f32(dir / "t.f32"), FormatError);

  dump_bank_json(bank, dir / "b.json");
  dump_bank_csv(bank, dir / "b.csv");
  const std::string csv = testing::slurp(dir / "b.csv");
  CHECK(csv.rfind("slice,order,bin,center_hz,bandwidth_hz\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') ==
        static_cast<long>(1 + bank.num_slices() * bank.num_bins()));
  write_tensor_csv(ht, dir / "t.csv");
  CHECK(std::filesystem::exists(dir / "t.csv"));
}
