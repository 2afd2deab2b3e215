#include "helpers.hpp"

#include "harmonika/checkpoint.hpp"
#include "harmonika/error.hpp"

#include <doctest.h>

using namespace harmonika;

TEST_CASE("checkpoint round trip at float32 precision") {
  auto dir = testing::scratch_dir("ckpt");
  NetConfig c;
  c.in_channels = 3;
  c.freq_bins = 12;
  c.channels = 4;
  auto p = init_params(c, 9, 3);
  p.gamma = {1.25, 0.75, 2.0};
  save_checkpoint(dir / "p.bin", p, 9);

  const std::string bytes = testing::slurp(dir / "p.bin");
  CHECK(bytes.substr(0, 8) == "UNIVHD01");

  const Checkpoint back = load_checkpoint(dir / "p.bin");
  CHECK(back.seed == 9);
  CHECK(back.params.config == c);
  CHECK(back.params.gamma == p.gamma);
  const auto la = p.layers();
  const auto lb = back.params.layers();
  REQUIRE(la.size() == lb.size());
  for (std::size_t i = 0; i < la.size(); ++i) {
    CHECK(la[i].first == lb[i].first);
    REQUIRE(la[i].second->weight.size() == lb[i].second->weight.size());
    for (std::size_t j = 0; j < la[i].second->weight.size(); ++j) {
      CHECK(lb[i].second->weight[j] ==
            static_cast<double>(static_cast<float>(la[i].second->weight[j])));
    }
  }

  // Saving the loaded parameters reproduces the file byte for byte.
  save_checkpoint(dir / "q.bin", back.params, 9);
  CHECK(testing::slurp(dir / "q.bin") == bytes);
}

TEST_CASE("corrupt checkpoints are rejected") {
  auto dir = testing::scratch_dir("ckpt_bad");
  NetConfig c;
  c.in_channels = 2;
  c.freq_bins = 8;
  c.channels = 2;
  save_checkpoint(dir / "p.bin", init_params(c, 1), 1);
  std::string bytes = testing::slurp(dir / "p.bin");

  std::ofstream(dir / "magic.bin", std::ios::binary) << "NOTMAGIC" << bytes.substr(8);
  CHECK_THROWS_AS(load_checkpoint(dir / "magic.bin"), FormatError);
  std::ofstream(dir / "short.bin", std::ios::binary) << bytes.substr(0, bytes.size() - 4);
  CHECK_THROWS_AS(load_checkpoint(dir / "short.bin"), FormatError);
  std::ofstream(dir / "tiny.bin", std::ios::binary) << bytes.substr(0, 12);
  CHECK_THROWS_AS(load_checkpoint(dir / "tiny.bin"), FormatError);
  CHECK_THROWS_AS(load_checkpoint(dir / "absent.bin"), FormatError);
}
