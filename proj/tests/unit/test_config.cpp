#include "helpers.hpp"

#include "harmonika/config.hpp"
#include "harmonika/error.hpp"

#include <doctest.h>

using namespace harmonika;

TEST_CASE("empty document gives the defaults") {
  const RunConfig c = config_from_json("{}");
  CHECK(c.sample_rate == 24000.0);
  CHECK(c.stft.fft_size == 2048);
  CHECK(c.stft.hop_size == 256);
  CHECK(c.bank.bins_per_octave == 24);
  CHECK(c.bank.num_harmonics == 10);
  CHECK(c.bank.include_half);
  CHECK(c.bank.f_min == 32.7);
  CHECK(c.net.channels == 32);
  const auto bank = HarmonicFilterBank::build(c.bank);
  const NetConfig net = c.net_for(bank);
  CHECK(net.in_channels == 11);
  CHECK(net.freq_bins == 124);
}

TEST_CASE("round trip through json") {
  RunConfig c = config_from_json(R"({
    "seed": 77,
    "frontend": {"sample_rate": 16000, "fft_size": 1024, "window": "rectangular"},
    "filterbank": {"num_harmonics": 4, "include_half": false, "per_slice_gamma": true},
    "discnet": {"channels": 8, "dilations": [1, 3, 9]},
    "metrics": {"f_ceil": 900}
  })");
  CHECK(c.seed == 77);
  CHECK(c.bank.sample_rate == 16000.0);
  CHECK(c.stft.window == WindowType::rectangular);
  CHECK(c.net.dilations[2] == 9);
  const std::string once = config_to_json(c);
  const RunConfig back = config_from_json(once);
  CHECK(config_to_json(back) == once);
  CHECK(back.bank.per_slice_gamma);
  CHECK(back.pitch.f_ceil == 900.0);
}

TEST_CASE("unknown keys and bad values are rejected") {
  CHECK_THROWS_AS(config_from_json(R"({"bogus": 1})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"filterbank": {"fmin": 30}})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"frontend": {"fft_size": "big"}})"), ConfigError);
  CHECK_THROWS_AS(config_from_json("not json"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"filterbank": {"f_min": 5000}})"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}
