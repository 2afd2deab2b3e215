#include "harmonika/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace harmonika {

namespace {

constexpr double kRelativeFloor = 1e-6;

Tensor3 random_tensor(std::size_t c, std::size_t h, std::size_t w, std::mt19937_64& rng,
                      double lo = -1.0, double hi = 1.0) {
  Tensor3 t(c, h, w);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

double dot(const Tensor3& a, const Tensor3& b) {
  return std::inner_product(a.data().begin(), a.data().end(), b.data().begin(), 0.0);
}

// Which indices of a parameter vector to probe.
std::vector<std::size_t> probe_indices(std::size_t n, std::size_t limit, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (limit != 0 && n > limit) {
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(limit);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

template <typename Loss>
void check_vector(GradcheckEntry& entry, std::vector<double>& values,
                  const std::vector<double>& analytic, const std::vector<std::size_t>& indices,
                  double eps, Loss&& loss) {
  for (std::size_t i : indices) {
    const double saved = values[i];
    values[i] = saved + eps;
    const double up = loss();
    values[i] = saved - eps;
    const double down = loss();
    values[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double err = gradcheck_relative_error(analytic[i], numeric);
    ++entry.checked;
    if (err > entry.max_rel_error) {
      entry.max_rel_error = err;
      entry.worst_index = i;
    }
  }
}

struct ConvCase {
  const char* name;
  Conv2dSpec spec;
  std::size_t rows;
  std::size_t cols;
};

std::vector<ConvCase> conv_cases() {
  std::vector<ConvCase> cases;
  Conv2dSpec dw;
  dw.in_channels = dw.out_channels = 3;
  dw.kernel_h = dw.kernel_w = 7;
  dw.depthwise = true;
  cases.push_back({"depthwise7x7", dw, 9, 6});

  Conv2dSpec pw;
  pw.in_channels = 3;
  pw.out_channels = 4;
  cases.push_back({"pointwise1x1", pw, 9, 6});

  Conv2dSpec normal;
  normal.in_channels = 3;
  normal.out_channels = 2;
  normal.kernel_h = normal.kernel_w = 7;
  cases.push_back({"normal7x7", normal, 9, 6});

  Conv2dSpec dilated;
  dilated.in_channels = 2;
  dilated.out_channels = 2;
  dilated.kernel_h = dilated.kernel_w = 5;
  dilated.dilation_h = dilated.dilation_w = 2;
  cases.push_back({"dilated5x5_d2", dilated, 4, 4});

  Conv2dSpec strided = dilated;
  strided.dilation_h = strided.dilation_w = 1;
  strided.stride_h = 2;
  cases.push_back({"strided5x5_s2x1", strided, 9, 5});

  Conv2dSpec final;
  final.in_channels = 3;
  final.out_channels = 1;
  final.kernel_h = 4;
  final.kernel_w = 3;
  final.same_h = false;
  cases.push_back({"final_valid4x3", final, 4, 7});
  return cases;
}

void finish(GradcheckReport& report, GradcheckEntry entry, double tolerance) {
  entry.pass = entry.max_rel_error < tolerance;
  report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
  report.pass = report.pass && entry.pass;
  report.entries.push_back(std::move(entry));
}

void run_conv_suite(GradcheckReport& report, const GradcheckOptions& opt, std::mt19937_64& rng) {
  for (const ConvCase& cc : conv_cases()) {
    ConvLayer layer = ConvLayer::zeros(cc.spec);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (double& w : layer.weight) w = dist(rng);
    for (double& b : layer.bias) b = dist(rng);
    Tensor3 x = random_tensor(cc.spec.in_channels, cc.rows, cc.cols, rng);
    const Tensor3 probe = conv2d_forward(x, layer);
    const Tensor3 up = random_tensor(probe.channels(), probe.rows(), probe.cols(), rng);

    const ConvGrads g = conv2d_backward(x, layer, up);
    GradBundle wrapped;  // lets a tamper hook see the conv gradients too
    wrapped.input = g.input;
    wrapped.params.final.weight = g.weight;
    wrapped.params.final.bias = g.bias;
    if (opt.tamper) opt.tamper(wrapped);

    auto loss = [&] { return dot(up, conv2d_forward(x, layer)); };
    const std::string base = std::string("conv.") + cc.name;
    GradcheckEntry w{"conv", base + ".weight"};
    check_vector(w, layer.weight, wrapped.params.final.weight,
                 probe_indices(layer.weight.size(), 0, rng), opt.eps, loss);
    finish(report, w, opt.tolerance);
    GradcheckEntry b{"conv", base + ".bias"};
    check_vector(b, layer.bias, wrapped.params.final.bias,
                 probe_indices(layer.bias.size(), 0, rng), opt.eps, loss);
    finish(report, b, opt.tolerance);
    GradcheckEntry in{"conv", base + ".input"};
    check_vector(in, x.data(), wrapped.input.data(), probe_indices(x.size(), 0, rng), opt.eps,
                 loss);
    finish(report, in, opt.tolerance);
  }
}

struct Upstreams {
  Tensor3 score;
  std::vector<Tensor3> features;
};

Upstreams random_upstreams(const DiscriminatorOutput& out, std::mt19937_64& rng) {
  Upstreams u;
  u.score = random_tensor(out.score.channels(), out.score.rows(), out.score.cols(), rng);
  for (const Tensor3& f : out.features) {
    u.features.push_back(random_tensor(f.channels(), f.rows(), f.cols(), rng));
  }
  return u;
}

double objective(const DiscriminatorOutput& out, const Upstreams& u) {
  double l = dot(u.score, out.score);
  for (std::size_t i = 0; i < out.features.size(); ++i) l += dot(u.features[i], out.features[i]);
  return l;
}

void randomize(DiscriminatorParams& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  for (auto& [name, layer] : p.layers()) {
    for (double& b : layer->bias) b = dist(rng);
  }
}

const char* suite_of(const std::string& layer) {
  if (layer.rfind("hcb", 0) == 0) return "hcb";
  if (layer.rfind("mdc", 0) == 0) return "mdc";
  return "final";
}

void run_network_suite(GradcheckReport& report, const GradcheckOptions& opt,
                       const GradcheckSetup& setup, std::mt19937_64& rng) {
  DiscriminatorParams params = init_params(setup.net, rng());
  randomize(params, rng);
  Tensor3 x = random_tensor(setup.net.in_channels, setup.net.freq_bins, setup.frames, rng, 0.0, 1.0);
  const Upstreams u = random_upstreams(forward(x, params), rng);

  GradBundle g = backward(x, params, u.score, u.features);
  if (opt.tamper) opt.tamper(g);
  auto loss = [&] { return objective(forward(x, params), u); };

  auto analytic_layers = g.params.layers();
  auto layers = params.layers();
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const std::string& name = layers[li].first;
    ConvLayer& layer = *layers[li].second;
    const ConvLayer& ga = *analytic_layers[li].second;
    GradcheckEntry w{suite_of(name), "net." + name + ".weight"};
    check_vector(w, layer.weight, ga.weight,
                 probe_indices(layer.weight.size(), setup.max_checks_per_layer, rng), opt.eps, loss);
    finish(report, w, opt.tolerance);
    GradcheckEntry b{suite_of(name), "net." + name + ".bias"};
    check_vector(b, layer.bias, ga.bias,
                 probe_indices(layer.bias.size(), setup.max_checks_per_layer, rng), opt.eps, loss);
    finish(report, b, opt.tolerance);
  }
  GradcheckEntry in{"hcb", "net.input"};
  check_vector(in, x.data(), g.input.data(),
               probe_indices(x.size(), setup.max_checks_per_layer, rng), opt.eps, loss);
  finish(report, in, opt.tolerance);
}

void run_gamma_suite(GradcheckReport& report, const GradcheckOptions& opt,
                     const GradcheckSetup& setup, bool per_slice, std::mt19937_64& rng) {
  HarmonicBankConfig bcfg = setup.bank;
  bcfg.per_slice_gamma = per_slice;
  const HarmonicFilterBank bank = HarmonicFilterBank::build(bcfg);

  std::normal_distribution<double> noise(0.0, 0.3);
  std::vector<double> samples(setup.samples);
  for (double& s : samples) s = noise(rng);
  const MagnitudeSpectrogram mag =
      MagnitudeSpectrogram::from(stft(AudioBuffer(samples, bcfg.sample_rate), setup.stft));

  NetConfig net = setup.net;
  net.in_channels = bank.num_slices();
  net.freq_bins = bank.num_bins();
  DiscriminatorParams params = init_params(net, rng(), bank.gamma().size());
  randomize(params, rng);
  for (std::size_t i = 0; i < params.gamma.size(); ++i) {
    params.gamma[i] = setup.gamma + 0.1 * static_cast<double>(i);
  }
  const Upstreams u = random_upstreams(forward(bank, mag, params), rng);

  GradBundle g = backward(bank, mag, params, u.score, u.features);
  if (opt.tamper) opt.tamper(g);
  auto loss = [&] { return objective(forward(bank, mag, params), u); };
  GradcheckEntry e{"gamma", per_slice ? "gamma.per_slice" : "gamma.global"};
  std::vector<std::size_t> all(params.gamma.size());
  std::iota(all.begin(), all.end(), 0);
  check_vector(e, params.gamma, g.params.gamma, all, opt.eps, loss);
  finish(report, e, opt.tolerance);
}

} // namespace

double gradcheck_relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), kRelativeFloor});
  return std::abs(analytic - numeric) / scale;
}

GradcheckSetup gradcheck_setup(GradcheckSize size) {
  GradcheckSetup s;
  s.bank.sample_rate = 24000.0;
  s.bank.f_min = 80.0;
  s.bank.include_half = true;
  s.stft.fft_size = 1024;
  s.stft.hop_size = 256;
  s.gamma = 1.3;
  if (size == GradcheckSize::tiny) {
    // 3 slices x 12 bins x 8 frames, 4 channels
    s.bank.num_harmonics = 2;
    s.bank.bins_per_octave = 2;
    s.net.channels = 4;
    s.frames = 8;
    s.samples = 1800;
    s.max_checks_per_layer = 0;
  } else {
    // 4 slices x 16 bins x 12 frames, 8 channels
    s.bank.num_harmonics = 3;
    s.bank.bins_per_octave = 3;
    s.net.channels = 8;
    s.frames = 12;
    s.samples = 2900;
    s.max_checks_per_layer = 48;
  }
  const HarmonicFilterBank bank = HarmonicFilterBank::build(s.bank);
  s.net.in_channels = bank.num_slices();
  s.net.freq_bins = bank.num_bins();
  return s;
}

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  const GradcheckSetup setup = gradcheck_setup(options.size);
  std::mt19937_64 rng(options.seed);
  GradcheckReport report;
  run_conv_suite(report, options, rng);
  run_network_suite(report, options, setup, rng);
  run_gamma_suite(report, options, setup, false, rng);
  run_gamma_suite(report, options, setup, true, rng);
  return report;
}

} // namespace harmonika
