#pragma once

#include "harmonika/tensor.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace harmonika {

// 2-D cross-correlation over (frequency, time). Rows are frequency, columns
// time. With `same_*` set an axis is zero-padded by floor(d (k - 1) / 2) per
// side; otherwise it is unpadded ("valid").
struct Conv2dSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  std::size_t dilation_h = 1;
  std::size_t dilation_w = 1;
  bool has_bias = true;
  bool depthwise = false;
  bool same_h = true;
  bool same_w = true;

  void validate() const;
  std::size_t pad_h() const { return same_h ? dilation_h * (kernel_h - 1) / 2 : 0; }
  std::size_t pad_w() const { return same_w ? dilation_w * (kernel_w - 1) / 2 : 0; }
  std::size_t inputs_per_output() const { return depthwise ? 1 : in_channels; }
  std::size_t fan_in() const { return inputs_per_output() * kernel_h * kernel_w; }
  std::size_t weight_count() const { return out_channels * fan_in(); }
  std::size_t bias_count() const { return has_bias ? out_channels : 0; }

  // Throws SizeError when the input is smaller than the dilated kernel.
  std::size_t out_rows(std::size_t rows) const;
  std::size_t out_cols(std::size_t cols) const;
};

// Weights are laid out [out][in_per_output][kh][kw].
struct ConvLayer {
  Conv2dSpec spec;
  std::vector<double> weight;
  std::vector<double> bias;

  static ConvLayer zeros(const Conv2dSpec& spec);
  std::size_t param_count() const { return weight.size() + bias.size(); }
};

Tensor3 conv2d_forward(const Tensor3& input, const Conv2dSpec& spec,
                       std::span<const double> weight, std::span<const double> bias);
inline Tensor3 conv2d_forward(const Tensor3& input, const ConvLayer& layer) {
  return conv2d_forward(input, layer.spec, layer.weight, layer.bias);
}

struct ConvGrads {
  Tensor3 input;
  std::vector<double> weight;
  std::vector<double> bias;
};

// Exact gradients of conv2d_forward w.r.t. input, weights and bias.
ConvGrads conv2d_backward(const Tensor3& input, const Conv2dSpec& spec,
                          std::span<const double> weight, const Tensor3& upstream);
inline ConvGrads conv2d_backward(const Tensor3& input, const ConvLayer& layer,
                                 const Tensor3& upstream) {
  return conv2d_backward(input, layer.spec, layer.weight, upstream);
}

// Slope 1 where x > 0, `slope` elsewhere (including x == 0).
void leaky_relu_inplace(Tensor3& x, double slope);
Tensor3 leaky_relu_backward(const Tensor3& pre_activation, const Tensor3& upstream,
                            double slope);

} // namespace harmonika
