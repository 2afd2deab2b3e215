#pragma once

#include "harmonika/conv.hpp"
#include "harmonika/filterbank.hpp"
#include "harmonika/tensor.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace harmonika {

inline constexpr std::size_t kMdcBlocks = 3;
inline constexpr std::size_t kDilatedPerBlock = 3;

// Shape hyperparameters of the discriminator.
struct NetConfig {
  std::size_t in_channels = 11;   // harmonic slices
  std::size_t freq_bins = 124;    // F
  std::size_t channels = 32;
  std::size_t hcb_kernel = 7;
  std::size_t mdc_kernel = 5;
  std::array<std::size_t, kDilatedPerBlock> dilations{1, 2, 4};
  std::size_t final_time_kernel = 3;
  double leaky_slope = 0.1;

  void validate() const;
  // Frequency extent after MDC block `block` (0-based).
  std::size_t mdc_out_rows(std::size_t block) const;
  // The final layer's frequency kernel covers the whole residual axis.
  std::size_t final_freq_kernel() const { return mdc_out_rows(kMdcBlocks - 1); }

  Conv2dSpec hcb_depthwise_spec() const;
  Conv2dSpec hcb_pointwise_spec() const;
  Conv2dSpec hcb_normal_spec() const;
  Conv2dSpec mdc_dilated_spec(std::size_t which) const;
  Conv2dSpec mdc_down_spec() const;
  Conv2dSpec final_spec() const;

  bool operator==(const NetConfig&) const = default;
};

struct MdcParams {
  std::array<ConvLayer, kDilatedPerBlock> dilated;
  ConvLayer down;  // stride (2, 1)
};

struct DiscriminatorParams {
  NetConfig config;
  ConvLayer hcb_depthwise;
  ConvLayer hcb_pointwise;
  ConvLayer hcb_normal;
  std::array<MdcParams, kMdcBlocks> mdc;
  ConvLayer final;
  // Filter-bank bandwidth divisor(s); size 1 (global) or one per slice.
  std::vector<double> gamma{1.0};

  // All zero weights and biases, gamma = 1.
  static DiscriminatorParams zeros(const NetConfig& config, std::size_t gamma_count = 1);

  // Layers in canonical order with stable names ("hcb.dsconv", "mdc0.dil2", ...).
  std::vector<std::pair<std::string, ConvLayer*>> layers();
  std::vector<std::pair<std::string, const ConvLayer*>> layers() const;

  std::size_t param_count() const;
};

// Gradients share the parameter layout.
struct GradBundle {
  DiscriminatorParams params;
  Tensor3 input;
};

struct DiscriminatorOutput {
  Tensor3 score;                  // [1, 1, T]
  std::vector<Tensor3> features;  // 3 MDC outputs + final conv output
};

// Deterministic init: weights ~ U(-a, a), a = sqrt(1 / fan_in); zero biases;
// gamma = 1.
DiscriminatorParams init_params(const NetConfig& config, std::uint64_t seed,
                                std::size_t gamma_count = 1);

// leaky(PConv(DSConv(x)) + Conv7x7(x))
Tensor3 hcb_forward(const Tensor3& x, const DiscriminatorParams& params);
// leaky(Down(sum_i Dilated_i(x))), halves the frequency axis.
Tensor3 mdc_forward(const Tensor3& x, const DiscriminatorParams& params, std::size_t block);
DiscriminatorOutput forward(const Tensor3& x, const DiscriminatorParams& params);

// Gradient of  <up_score, score> + sum_i <up_features[i], features[i]>.
// Empty tensors stand for zero upstream. params.gamma in the result is zero.
GradBundle backward(const Tensor3& x, const DiscriminatorParams& params,
                    const Tensor3& up_score, const std::vector<Tensor3>& up_features);

// Full pipeline from an STFT magnitude: the bank's divisors are replaced by
// params.gamma before projection.
DiscriminatorOutput forward(const HarmonicFilterBank& bank, const MagnitudeSpectrogram& mag,
                            const DiscriminatorParams& params);
// As backward() above, additionally chaining the input gradient into gamma.
GradBundle backward(const HarmonicFilterBank& bank, const MagnitudeSpectrogram& mag,
                    const DiscriminatorParams& params, const Tensor3& up_score,
                    const std::vector<Tensor3>& up_features);

struct GanLosses {
  double d_loss = 0.0;
  double g_adv_loss = 0.0;
  double fm_loss = 0.0;
};

// Least-squares GAN losses with L1 feature matching (mean per tap, summed).
GanLosses ls_gan_losses(const DiscriminatorOutput& real, const DiscriminatorOutput& fake);

// d d_loss / d score for the real and fake branches.
std::pair<Tensor3, Tensor3> d_loss_score_gradients(const DiscriminatorOutput& real,
                                                   const DiscriminatorOutput& fake);

struct ParamCensus {
  std::vector<std::pair<std::string, std::size_t>> layers;
  std::size_t gamma = 0;
  std::size_t total = 0;
};

ParamCensus param_census(const DiscriminatorParams& params);

// params -= lr * grads (gamma included).
void sgd_step(DiscriminatorParams& params, const DiscriminatorParams& grads, double lr);

} // namespace harmonika
