#include "harmonika/discnet.hpp"

#include "harmonika/error.hpp"

#include <cmath>
#include <random>
#include <string>

namespace harmonika {

void NetConfig::validate() const {
  if (in_channels == 0 || freq_bins == 0 || channels == 0) {
    throw ConfigError("network needs in_channels, freq_bins and channels >= 1");
  }
  if (hcb_kernel == 0 || mdc_kernel == 0 || final_time_kernel == 0) {
    throw ConfigError("kernel sizes must be >= 1");
  }
  for (std::size_t d : dilations) {
    if (d == 0) throw ConfigError("dilation factors must be >= 1");
  }
  if (!(leaky_slope >= 0.0)) throw ConfigError("leaky slope must be >= 0");
}

std::size_t NetConfig::mdc_out_rows(std::size_t block) const {
  std::size_t rows = freq_bins;
  const Conv2dSpec down = mdc_down_spec();
  for (std::size_t b = 0; b <= block; ++b) rows = down.out_rows(rows);
  return rows;
}

Conv2dSpec NetConfig::hcb_depthwise_spec() const {
  Conv2dSpec s;
  s.in_channels = s.out_channels = in_channels;
  s.kernel_h = s.kernel_w = hcb_kernel;
  s.depthwise = true;
  return s;
}

Conv2dSpec NetConfig::hcb_pointwise_spec() const {
  Conv2dSpec s;
  s.in_channels = in_channels;
  s.out_channels = channels;
  return s;
}

Conv2dSpec NetConfig::hcb_normal_spec() const {
  Conv2dSpec s;
  s.in_channels = in_channels;
  s.out_channels = channels;
  s.kernel_h = s.kernel_w = hcb_kernel;
  return s;
}

Conv2dSpec NetConfig::mdc_dilated_spec(std::size_t which) const {
  Conv2dSpec s;
  s.in_channels = s.out_channels = channels;
  s.kernel_h = s.kernel_w = mdc_kernel;
  s.dilation_h = s.dilation_w = dilations.at(which);
  return s;
}

Conv2dSpec NetConfig::mdc_down_spec() const {
  Conv2dSpec s;
  s.in_channels = s.out_channels = channels;
  s.kernel_h = s.kernel_w = mdc_kernel;
  s.stride_h = 2;
  return s;
}

Conv2dSpec NetConfig::final_spec() const {
  Conv2dSpec s;
  s.in_channels = channels;
  s.out_channels = 1;
  s.kernel_h = final_freq_kernel();
  s.kernel_w = final_time_kernel;
  s.same_h = false;
  return s;
}

DiscriminatorParams DiscriminatorParams::zeros(const NetConfig& config, std::size_t gamma_count) {
  config.validate();
  if (gamma_count == 0) throw ConfigError("need at least one gamma value");
  DiscriminatorParams p;
  p.config = config;
  p.hcb_depthwise = ConvLayer::zeros(config.hcb_depthwise_spec());
  p.hcb_pointwise = ConvLayer::zeros(config.hcb_pointwise_spec());
  p.hcb_normal = ConvLayer::zeros(config.hcb_normal_spec());
  for (auto& block : p.mdc) {
    for (std::size_t i = 0; i < kDilatedPerBlock; ++i) {
      block.dilated[i] = ConvLayer::zeros(config.mdc_dilated_spec(i));
    }
    block.down = ConvLayer::zeros(config.mdc_down_spec());
  }
  p.final = ConvLayer::zeros(config.final_spec());
  p.gamma.assign(gamma_count, 1.0);
  return p;
}

namespace {

template <typename Params, typename Layer>
std::vector<std::pair<std::string, Layer*>> collect_layers(Params& p) {
  std::vector<std::pair<std::string, Layer*>> out;
  out.emplace_back("hcb.dsconv", &p.hcb_depthwise);
  out.emplace_back("hcb.pconv", &p.hcb_pointwise);
  out.emplace_back("hcb.normal", &p.hcb_normal);
  for (std::size_t b = 0; b < kMdcBlocks; ++b) {
    const std::string prefix = "mdc" + std::to_string(b) + ".";
    for (std::size_t i = 0; i < kDilatedPerBlock; ++i) {
      out.emplace_back(prefix + "dil" + std::to_string(p.config.dilations[i]), &p.mdc[b].dilated[i]);
    }
    out.emplace_back(prefix + "down", &p.mdc[b].down);
  }
  out.emplace_back("final", &p.final);
  return out;
}

void add_inplace(Tensor3& acc, const Tensor3& x) {
  if (acc.size() == 0) {
    acc = x;
    return;
  }
  if (!acc.same_shape(x)) throw SizeError("tensor shape mismatch in accumulation");
  auto& a = acc.data();
  const auto& b = x.data();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

// Activations kept for the backward pass.
struct ForwardCache {
  Tensor3 dw_out;
  Tensor3 hcb_pre;
  Tensor3 hcb_out;
  std::array<Tensor3, kMdcBlocks> mdc_sum;
  std::array<Tensor3, kMdcBlocks> mdc_pre;
  std::array<Tensor3, kMdcBlocks> mdc_out;
  Tensor3 score;
};

void check_input(const Tensor3& x, const NetConfig& cfg) {
  if (x.channels() != cfg.in_channels) {
    throw SizeError("discriminator expects " + std::to_string(cfg.in_channels) +
                    " harmonic slices, got " + std::to_string(x.channels()));
  }
  if (x.rows() != cfg.freq_bins) {
    throw SizeError("discriminator expects " + std::to_string(cfg.freq_bins) +
                    " frequency bins, got " + std::to_string(x.rows()));
  }
  if (x.cols() == 0) throw SizeError("discriminator input has no frames");
}

void run_hcb(const Tensor3& x, const DiscriminatorParams& p, ForwardCache& c) {
  c.dw_out = conv2d_forward(x, p.hcb_depthwise);
  c.hcb_pre = conv2d_forward(c.dw_out, p.hcb_pointwise);
  add_inplace(c.hcb_pre, conv2d_forward(x, p.hcb_normal));
  c.hcb_out = c.hcb_pre;
  leaky_relu_inplace(c.hcb_out, p.config.leaky_slope);
}

void run_mdc(const Tensor3& x, const DiscriminatorParams& p, std::size_t b, ForwardCache& c) {
  Tensor3 sum;
  for (const ConvLayer& layer : p.mdc[b].dilated) add_inplace(sum, conv2d_forward(x, layer));
  c.mdc_pre[b] = conv2d_forward(sum, p.mdc[b].down);
  c.mdc_sum[b] = std::move(sum);
  c.mdc_out[b] = c.mdc_pre[b];
  leaky_relu_inplace(c.mdc_out[b], p.config.leaky_slope);
}

ForwardCache run_forward(const Tensor3& x, const DiscriminatorParams& p) {
  check_input(x, p.config);
  ForwardCache c;
  run_hcb(x, p, c);
  for (std::size_t b = 0; b < kMdcBlocks; ++b) {
    run_mdc(b == 0 ? c.hcb_out : c.mdc_out[b - 1], p, b, c);
  }
  c.score = conv2d_forward(c.mdc_out[kMdcBlocks - 1], p.final);
  return c;
}

void check_upstream(const Tensor3& up, const Tensor3& ref, const char* what) {
  if (up.size() != 0 && !up.same_shape(ref)) {
    throw SizeError(std::string("upstream ") + what + " shape " + up.shape_string() +
                    " does not match " + ref.shape_string());
  }
}

void copy_grads(ConvLayer& dst, const ConvGrads& g) {
  dst.weight = g.weight;
  dst.bias = g.bias;
}

} // namespace

std::vector<std::pair<std::string, ConvLayer*>> DiscriminatorParams::layers() {
  return collect_layers<DiscriminatorParams, ConvLayer>(*this);
}

std::vector<std::pair<std::string, const ConvLayer*>> DiscriminatorParams::layers() const {
  return collect_layers<const DiscriminatorParams, const ConvLayer>(*this);
}

std::size_t DiscriminatorParams::param_count() const {
  std::size_t n = gamma.size();
  for (const auto& [name, layer] : layers()) n += layer->param_count();
  return n;
}

DiscriminatorParams init_params(const NetConfig& config, std::uint64_t seed,
                                std::size_t gamma_count) {
  DiscriminatorParams p = DiscriminatorParams::zeros(config, gamma_count);
  std::mt19937_64 rng(seed);
  for (auto& [name, layer] : p.layers()) {
    const double a = std::sqrt(1.0 / static_cast<double>(layer->spec.fan_in()));
    std::uniform_real_distribution<double> dist(-a, a);
    for (double& w : layer->weight) w = dist(rng);
  }
  return p;
}

Tensor3 hcb_forward(const Tensor3& x, const DiscriminatorParams& params) {
  if (x.channels() != params.config.in_channels) {
    throw SizeError("HCB expects " + std::to_string(params.config.in_channels) +
                    " channels, got " + std::to_string(x.channels()));
  }
  ForwardCache c;
  run_hcb(x, params, c);
  return std::move(c.hcb_out);
}

Tensor3 mdc_forward(const Tensor3& x, const DiscriminatorParams& params, std::size_t block) {
  if (block >= kMdcBlocks) throw SizeError("MDC block index out of range");
  if (x.channels() != params.config.channels) {
    throw SizeError("MDC expects " + std::to_string(params.config.channels) +
                    " channels, got " + std::to_string(x.channels()));
  }
  ForwardCache c;
  run_mdc(x, params, block, c);
  return std::move(c.mdc_out[block]);
}

DiscriminatorOutput forward(const Tensor3& x, const DiscriminatorParams& params) {
  ForwardCache c = run_forward(x, params);
  DiscriminatorOutput out;
  out.features.reserve(kMdcBlocks + 1);
  for (auto& f : c.mdc_out) out.features.push_back(std::move(f));
  out.features.push_back(c.score);
  out.score = std::move(c.score);
  return out;
}

GradBundle backward(const Tensor3& x, const DiscriminatorParams& params,
                    const Tensor3& up_score, const std::vector<Tensor3>& up_features) {
  if (!up_features.empty() && up_features.size() != kMdcBlocks + 1) {
    throw SizeError("expected " + std::to_string(kMdcBlocks + 1) + " feature upstreams, got " +
                    std::to_string(up_features.size()));
  }
  const ForwardCache c = run_forward(x, params);
  const double slope = params.config.leaky_slope;
  auto feature_up = [&](std::size_t i) -> const Tensor3* {
    if (up_features.empty() || up_features[i].size() == 0) return nullptr;
    return &up_features[i];
  };

  check_upstream(up_score, c.score, "score");
  for (std::size_t b = 0; b < kMdcBlocks; ++b) {
    if (const Tensor3* u = feature_up(b)) check_upstream(*u, c.mdc_out[b], "feature");
  }
  if (const Tensor3* u = feature_up(kMdcBlocks)) check_upstream(*u, c.score, "feature");

  GradBundle g;
  g.params = DiscriminatorParams::zeros(params.config, params.gamma.size());
  g.params.gamma.assign(params.gamma.size(), 0.0);

  Tensor3 g_score(c.score.channels(), c.score.rows(), c.score.cols());
  if (up_score.size() != 0) add_inplace(g_score, up_score);
  if (const Tensor3* u = feature_up(kMdcBlocks)) add_inplace(g_score, *u);

  const ConvGrads gf = conv2d_backward(c.mdc_out[kMdcBlocks - 1], params.final, g_score);
  copy_grads(g.params.final, gf);
  Tensor3 g_out = gf.input;

  for (std::size_t bi = kMdcBlocks; bi-- > 0;) {
    if (const Tensor3* u = feature_up(bi)) add_inplace(g_out, *u);
    const Tensor3 g_pre = leaky_relu_backward(c.mdc_pre[bi], g_out, slope);
    const ConvGrads gd = conv2d_backward(c.mdc_sum[bi], params.mdc[bi].down, g_pre);
    copy_grads(g.params.mdc[bi].down, gd);
    const Tensor3& block_in = bi == 0 ? c.hcb_out : c.mdc_out[bi - 1];
    Tensor3 g_in;
    for (std::size_t i = 0; i < kDilatedPerBlock; ++i) {
      const ConvGrads gi = conv2d_backward(block_in, params.mdc[bi].dilated[i], gd.input);
      copy_grads(g.params.mdc[bi].dilated[i], gi);
      add_inplace(g_in, gi.input);
    }
    g_out = std::move(g_in);
  }

  const Tensor3 g_hcb_pre = leaky_relu_backward(c.hcb_pre, g_out, slope);
  const ConvGrads gp = conv2d_backward(c.dw_out, params.hcb_pointwise, g_hcb_pre);
  copy_grads(g.params.hcb_pointwise, gp);
  const ConvGrads gdw = conv2d_backward(x, params.hcb_depthwise, gp.input);
  copy_grads(g.params.hcb_depthwise, gdw);
  const ConvGrads gn = conv2d_backward(x, params.hcb_normal, g_hcb_pre);
  copy_grads(g.params.hcb_normal, gn);

  g.input = gdw.input;
  add_inplace(g.input, gn.input);
  return g;
}

namespace {

HarmonicFilterBank pipeline_bank(const HarmonicFilterBank& bank, const DiscriminatorParams& params) {
  if (bank.num_slices() != params.config.in_channels || bank.num_bins() != params.config.freq_bins) {
    throw SizeError("filter bank [" + std::to_string(bank.num_slices()) + "," +
                    std::to_string(bank.num_bins()) + "] does not match network input [" +
                    std::to_string(params.config.in_channels) + "," +
                    std::to_string(params.config.freq_bins) + "]");
  }
  return bank.with_gamma(params.gamma);
}

} // namespace

DiscriminatorOutput forward(const HarmonicFilterBank& bank, const MagnitudeSpectrogram& mag,
                            const DiscriminatorParams& params) {
  const HarmonicTensor t = project(pipeline_bank(bank, params), mag);
  return forward(t.values, params);
}

GradBundle backward(const HarmonicFilterBank& bank, const MagnitudeSpectrogram& mag,
                    const DiscriminatorParams& params, const Tensor3& up_score,
                    const std::vector<Tensor3>& up_features) {
  const HarmonicFilterBank b = pipeline_bank(bank, params);
  const HarmonicTensor t = project(b, mag);
  GradBundle g = backward(t.values, params, up_score, up_features);
  g.params.gamma = gamma_gradient(b, mag, g.input);
  return g;
}

GanLosses ls_gan_losses(const DiscriminatorOutput& real, const DiscriminatorOutput& fake) {
  if (!real.score.same_shape(fake.score) || real.features.size() != fake.features.size()) {
    throw SizeError("real and fake discriminator outputs are not congruent");
  }
  if (real.score.size() == 0) throw SizeError("empty discriminator score");
  GanLosses l;
  const auto& rs = real.score.data();
  const auto& fs = fake.score.data();
  double real_term = 0.0;
  double fake_term = 0.0;
  double gen_term = 0.0;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    real_term += (rs[i] - 1.0) * (rs[i] - 1.0);
    fake_term += fs[i] * fs[i];
    gen_term += (fs[i] - 1.0) * (fs[i] - 1.0);
  }
  const auto n = static_cast<double>(rs.size());
  l.d_loss = real_term / n + fake_term / n;
  l.g_adv_loss = gen_term / n;
  for (std::size_t f = 0; f < real.features.size(); ++f) {
    const Tensor3& a = real.features[f];
    const Tensor3& b = fake.features[f];
    if (!a.same_shape(b)) throw SizeError("feature tap shapes differ");
    if (a.size() == 0) continue;
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a.data()[i] - b.data()[i]);
    l.fm_loss += acc / static_cast<double>(a.size());
  }
  return l;
}

std::pair<Tensor3, Tensor3> d_loss_score_gradients(const DiscriminatorOutput& real,
                                                   const DiscriminatorOutput& fake) {
  if (!real.score.same_shape(fake.score)) throw SizeError("score shapes differ");
  Tensor3 gr = real.score;
  Tensor3 gf = fake.score;
  const auto n = static_cast<double>(gr.size());
  for (double& v : gr.data()) v = 2.0 * (v - 1.0) / n;
  for (double& v : gf.data()) v = 2.0 * v / n;
  return {std::move(gr), std::move(gf)};
}

ParamCensus param_census(const DiscriminatorParams& params) {
  ParamCensus c;
  for (const auto& [name, layer] : params.layers()) {
    c.layers.emplace_back(name, layer->param_count());
    c.total += layer->param_count();
  }
  c.gamma = params.gamma.size();
  c.total += c.gamma;
  return c;
}

void sgd_step(DiscriminatorParams& params, const DiscriminatorParams& grads, double lr) {
  auto dst = params.layers();
  const auto src = grads.layers();
  if (dst.size() != src.size() || params.gamma.size() != grads.gamma.size()) {
    throw SizeError("gradient bundle does not match parameters");
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    ConvLayer& p = *dst[i].second;
    const ConvLayer& g = *src[i].second;
    if (p.weight.size() != g.weight.size() || p.bias.size() != g.bias.size()) {
      throw SizeError("gradient shape mismatch in layer " + dst[i].first);
    }
    for (std::size_t j = 0; j < p.weight.size(); ++j) p.weight[j] -= lr * g.weight[j];
    for (std::size_t j = 0; j < p.bias.size(); ++j) p.bias[j] -= lr * g.bias[j];
  }
  for (std::size_t j = 0; j < params.gamma.size(); ++j) params.gamma[j] -= lr * grads.gamma[j];
}

} // namespace harmonika
