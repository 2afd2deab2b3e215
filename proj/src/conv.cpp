#include "harmonika/conv.hpp"

#include "harmonika/error.hpp"

#include <algorithm>
#include <string>

namespace harmonika {

void Conv2dSpec::validate() const {
  if (in_channels == 0 || out_channels == 0 || kernel_h == 0 || kernel_w == 0 ||
      stride_h == 0 || stride_w == 0 || dilation_h == 0 || dilation_w == 0) {
    throw ConfigError("convolution sizes must all be >= 1");
  }
  if (depthwise && out_channels != in_channels) {
    throw ConfigError("depthwise convolution needs out_channels == in_channels");
  }
}

namespace {

std::size_t out_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                       std::size_t dilation, std::size_t pad, const char* axis) {
  const std::size_t span = dilation * (kernel - 1) + 1;
  if (in + 2 * pad < span) {
    throw SizeError(std::string("input ") + axis + " extent " + std::to_string(in) +
                    " is smaller than the dilated kernel (" + std::to_string(span) + ")");
  }
  return (in + 2 * pad - span) / stride + 1;
}

// Output positions o in [0, n_out) whose input index o*s - p + j*d lies in
// [0, n_in).
struct Range {
  std::size_t lo;
  std::size_t hi;  // exclusive
};

Range valid_range(std::size_t n_in, std::size_t n_out, std::size_t stride,
                  std::size_t pad, std::size_t tap_offset) {
  // o*s + tap_offset - pad >= 0  and  <= n_in - 1
  const auto s = static_cast<std::ptrdiff_t>(stride);
  const auto shift = static_cast<std::ptrdiff_t>(tap_offset) - static_cast<std::ptrdiff_t>(pad);
  std::ptrdiff_t lo = shift >= 0 ? 0 : (-shift + s - 1) / s;
  const std::ptrdiff_t top = static_cast<std::ptrdiff_t>(n_in) - 1 - shift;
  std::ptrdiff_t hi = top < 0 ? 0 : top / s + 1;
  hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(n_out));
  lo = std::min(lo, hi);
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

void check_input(const Tensor3& input, const Conv2dSpec& spec) {
  spec.validate();
  if (input.channels() != spec.in_channels) {
    throw SizeError("convolution expects " + std::to_string(spec.in_channels) +
                    " input channels, got " + std::to_string(input.channels()));
  }
}

void check_weights(const Conv2dSpec& spec, std::size_t n_weight) {
  if (n_weight != spec.weight_count()) {
    throw SizeError("expected " + std::to_string(spec.weight_count()) + " weights, got " +
                    std::to_string(n_weight));
  }
}

} // namespace

std::size_t Conv2dSpec::out_rows(std::size_t rows) const {
  return out_extent(rows, kernel_h, stride_h, dilation_h, pad_h(), "frequency");
}

std::size_t Conv2dSpec::out_cols(std::size_t cols) const {
  return out_extent(cols, kernel_w, stride_w, dilation_w, pad_w(), "time");
}

ConvLayer ConvLayer::zeros(const Conv2dSpec& spec) {
  spec.validate();
  return {spec, std::vector<double>(spec.weight_count(), 0.0),
          std::vector<double>(spec.bias_count(), 0.0)};
}

Tensor3 conv2d_forward(const Tensor3& input, const Conv2dSpec& spec,
                       std::span<const double> weight, std::span<const double> bias) {
  check_input(input, spec);
  check_weights(spec, weight.size());
  if (bias.size() != spec.bias_count()) {
    throw SizeError("expected " + std::to_string(spec.bias_count()) + " biases, got " +
                    std::to_string(bias.size()));
  }
  const std::size_t rows = input.rows();
  const std::size_t cols = input.cols();
  const std::size_t out_h = spec.out_rows(rows);
  const std::size_t out_w = spec.out_cols(cols);
  const std::size_t per_out = spec.inputs_per_output();
  const std::size_t kh = spec.kernel_h;
  const std::size_t kw = spec.kernel_w;

  Tensor3 out(spec.out_channels, out_h, out_w);
  for (std::size_t oc = 0; oc < spec.out_channels; ++oc) {
    double* dst = out.channel(oc);
    if (spec.has_bias) std::fill(dst, dst + out_h * out_w, bias[oc]);
    for (std::size_t j = 0; j < per_out; ++j) {
      const std::size_t ic = spec.depthwise ? oc : j;
      const double* src = input.channel(ic);
      const double* w = &weight[(oc * per_out + j) * kh * kw];
      for (std::size_t a = 0; a < kh; ++a) {
        const Range rr = valid_range(rows, out_h, spec.stride_h, spec.pad_h(), a * spec.dilation_h);
        for (std::size_t b = 0; b < kw; ++b) {
          const double wv = w[a * kw + b];
          const Range cr = valid_range(cols, out_w, spec.stride_w, spec.pad_w(), b * spec.dilation_w);
          for (std::size_t oh = rr.lo; oh < rr.hi; ++oh) {
            const std::size_t ih = oh * spec.stride_h + a * spec.dilation_h - spec.pad_h();
            const double* in_row = src + ih * cols;
            double* out_row = dst + oh * out_w;
            const std::size_t col_shift = b * spec.dilation_w - spec.pad_w();
            for (std::size_t ow = cr.lo; ow < cr.hi; ++ow) {
              out_row[ow] += wv * in_row[ow * spec.stride_w + col_shift];
            }
          }
        }
      }
    }
  }
  return out;
}

ConvGrads conv2d_backward(const Tensor3& input, const Conv2dSpec& spec,
                          std::span<const double> weight, const Tensor3& upstream) {
  check_input(input, spec);
  check_weights(spec, weight.size());
  const std::size_t rows = input.rows();
  const std::size_t cols = input.cols();
  const std::size_t out_h = spec.out_rows(rows);
  const std::size_t out_w = spec.out_cols(cols);
  if (upstream.channels() != spec.out_channels || upstream.rows() != out_h ||
      upstream.cols() != out_w) {
    throw SizeError("upstream shape " + upstream.shape_string() + " does not match [" +
                    std::to_string(spec.out_channels) + "," + std::to_string(out_h) + "," +
                    std::to_string(out_w) + "]");
  }
  const std::size_t per_out = spec.inputs_per_output();
  const std::size_t kh = spec.kernel_h;
  const std::size_t kw = spec.kernel_w;

  ConvGrads g;
  g.input = Tensor3(input.channels(), rows, cols);
  g.weight.assign(spec.weight_count(), 0.0);
  g.bias.assign(spec.bias_count(), 0.0);

  for (std::size_t oc = 0; oc < spec.out_channels; ++oc) {
    const double* up = upstream.channel(oc);
    if (spec.has_bias) {
      double acc = 0.0;
      for (std::size_t i = 0; i < out_h * out_w; ++i) acc += up[i];
      g.bias[oc] = acc;
    }
    for (std::size_t j = 0; j < per_out; ++j) {
      const std::size_t ic = spec.depthwise ? oc : j;
      const double* src = input.channel(ic);
      double* gin = g.input.channel(ic);
      const std::size_t wbase = (oc * per_out + j) * kh * kw;
      for (std::size_t a = 0; a < kh; ++a) {
        const Range rr = valid_range(rows, out_h, spec.stride_h, spec.pad_h(), a * spec.dilation_h);
        for (std::size_t b = 0; b < kw; ++b) {
          const double wv = weight[wbase + a * kw + b];
          const Range cr = valid_range(cols, out_w, spec.stride_w, spec.pad_w(), b * spec.dilation_w);
          const std::size_t col_shift = b * spec.dilation_w - spec.pad_w();
          double gw = 0.0;
          for (std::size_t oh = rr.lo; oh < rr.hi; ++oh) {
            const std::size_t ih = oh * spec.stride_h + a * spec.dilation_h - spec.pad_h();
            const double* in_row = src + ih * cols;
            double* gin_row = gin + ih * cols;
            const double* up_row = up + oh * out_w;
            for (std::size_t ow = cr.lo; ow < cr.hi; ++ow) {
              const std::size_t iw = ow * spec.stride_w + col_shift;
              gw += up_row[ow] * in_row[iw];
              gin_row[iw] += wv * up_row[ow];
            }
          }
          g.weight[wbase + a * kw + b] = gw;
        }
      }
    }
  }
  return g;
}

void leaky_relu_inplace(Tensor3& x, double slope) {
  for (double& v : x.data()) {
    if (!(v > 0.0)) v *= slope;
  }
}

Tensor3 leaky_relu_backward(const Tensor3& pre_activation, const Tensor3& upstream,
                            double slope) {
  if (!pre_activation.same_shape(upstream)) {
    throw SizeError("leaky ReLU upstream shape mismatch");
  }
  Tensor3 g = upstream;
  const auto& pre = pre_activation.data();
  auto& d = g.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(pre[i] > 0.0)) d[i] *= slope;
  }
  return g;
}

} // namespace harmonika
