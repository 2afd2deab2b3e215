#include "harmonika/checkpoint.hpp"

#include "harmonika/error.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace harmonika {

namespace {

constexpr char kMagic[] = "UNIVHD01";
constexpr std::size_t kMagicSize = 8;

using nlohmann::ordered_json;

ordered_json config_to_json(const NetConfig& c) {
  return {{"in_channels", c.in_channels},
          {"freq_bins", c.freq_bins},
          {"channels", c.channels},
          {"hcb_kernel", c.hcb_kernel},
          {"mdc_kernel", c.mdc_kernel},
          {"dilations", c.dilations},
          {"final_time_kernel", c.final_time_kernel},
          {"leaky_slope", c.leaky_slope}};
}

NetConfig config_from_json(const nlohmann::json& j) {
  NetConfig c;
  c.in_channels = j.at("in_channels").get<std::size_t>();
  c.freq_bins = j.at("freq_bins").get<std::size_t>();
  c.channels = j.at("channels").get<std::size_t>();
  c.hcb_kernel = j.at("hcb_kernel").get<std::size_t>();
  c.mdc_kernel = j.at("mdc_kernel").get<std::size_t>();
  c.dilations = j.at("dilations").get<std::array<std::size_t, kDilatedPerBlock>>();
  c.final_time_kernel = j.at("final_time_kernel").get<std::size_t>();
  c.leaky_slope = j.at("leaky_slope").get<double>();
  return c;
}

ordered_json layer_to_json(const std::string& name, const ConvLayer& l) {
  const Conv2dSpec& s = l.spec;
  return {{"name", name},
          {"in_channels", s.in_channels},
          {"out_channels", s.out_channels},
          {"kernel", {s.kernel_h, s.kernel_w}},
          {"stride", {s.stride_h, s.stride_w}},
          {"dilation", {s.dilation_h, s.dilation_w}},
          {"depthwise", s.depthwise},
          {"same_padding", {s.same_h, s.same_w}},
          {"weight_shape", {s.out_channels, s.inputs_per_output(), s.kernel_h, s.kernel_w}},
          {"bias_shape", {s.bias_count()}}};
}

void put_f32(std::string& out, double v) {
  const auto u = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
}

double get_f32(const unsigned char* p) {
  const std::uint32_t u = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                          (static_cast<std::uint32_t>(p[2]) << 16) |
                          (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(u);
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const DiscriminatorParams& params,
                     std::uint64_t seed) {
  ordered_json header;
  header["version"] = 1;
  header["seed"] = seed;
  header["config"] = config_to_json(params.config);
  header["gamma"] = params.gamma;
  header["layers"] = ordered_json::array();
  for (const auto& [name, layer] : params.layers()) {
    header["layers"].push_back(layer_to_json(name, *layer));
  }
  const std::string text = header.dump();

  std::string out(kMagic, kMagicSize);
  const auto len = static_cast<std::uint64_t>(text.size());
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((len >> (8 * i)) & 0xFF));
  out += text;
  for (const auto& [name, layer] : params.layers()) {
    for (double w : layer->weight) put_f32(out, w);
    for (double b : layer->bias) put_f32(out, b);
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot write checkpoint " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open checkpoint " + path.string());
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(f),
                                         std::istreambuf_iterator<char>()};
  if (bytes.size() < kMagicSize + 8 || std::memcmp(bytes.data(), kMagic, kMagicSize) != 0) {
    throw FormatError("not a UNIVHD01 checkpoint: " + path.string());
  }
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(bytes[kMagicSize + i]) << (8 * i);
  const std::size_t header_start = kMagicSize + 8;
  if (len > bytes.size() - header_start) throw FormatError("truncated checkpoint header");

  Checkpoint ck;
  try {
    const auto header = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(header_start),
                                              bytes.begin() + static_cast<std::ptrdiff_t>(header_start + len));
    ck.seed = header.at("seed").get<std::uint64_t>();
    const NetConfig cfg = config_from_json(header.at("config"));
    const auto gamma = header.at("gamma").get<std::vector<double>>();
    ck.params = DiscriminatorParams::zeros(cfg, gamma.size());
    ck.params.gamma = gamma;

    const auto& layers_json = header.at("layers");
    auto layers = ck.params.layers();
    if (layers_json.size() != layers.size()) throw FormatError("checkpoint layer count mismatch");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& lj = layers_json[i];
      const ConvLayer& l = *layers[i].second;
      const auto wshape = lj.at("weight_shape").get<std::vector<std::size_t>>();
      const std::vector<std::size_t> expect{l.spec.out_channels, l.spec.inputs_per_output(),
                                            l.spec.kernel_h, l.spec.kernel_w};
      if (lj.at("name").get<std::string>() != layers[i].first || wshape != expect) {
        throw FormatError("checkpoint layer " + std::to_string(i) + " does not match its config");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("bad checkpoint config: ") + e.what());
  }

  std::size_t pos = header_start + len;
  for (auto& [name, layer] : ck.params.layers()) {
    const std::size_t need = 4 * (layer->weight.size() + layer->bias.size());
    if (bytes.size() - pos < need) throw FormatError("truncated checkpoint payload");
    for (double& w : layer->weight) {
      w = get_f32(&bytes[pos]);
      pos += 4;
    }
    for (double& b : layer->bias) {
      b = get_f32(&bytes[pos]);
      pos += 4;
    }
  }
  if (pos != bytes.size()) throw FormatError("trailing bytes after checkpoint payload");
  return ck;
}

} // namespace harmonika
