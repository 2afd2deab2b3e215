#include "harmonika/conv.hpp"
#include "harmonika/error.hpp"

#include <doctest.h>

#include <random>

using namespace harmonika;

namespace {

Tensor3 random_tensor(std::size_t c, std::size_t h, std::size_t w, unsigned seed) {
  Tensor3 t(c, h, w);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

std::vector<double> random_vec(std::size_t n, unsigned seed) {
  std::vector<double> v(n);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& x : v) x = u(rng);
  return v;
}

double dot(const Tensor3& a, const Tensor3& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a.data()[i] * b.data()[i];
  return acc;
}

double rel(double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6}); }

// Central differences of <up, conv(x)> w.r.t. every input, weight and bias.
void check_fd(const Conv2dSpec& spec, std::size_t rows, std::size_t cols, unsigned seed,
              double tol) {
  Tensor3 x = random_tensor(spec.in_channels, rows, cols, seed);
  std::vector<double> w = random_vec(spec.weight_count(), seed + 1);
  std::vector<double> b = random_vec(spec.bias_count(), seed + 2);
  const Tensor3 y = conv2d_forward(x, spec, w, b);
  const Tensor3 up = random_tensor(y.channels(), y.rows(), y.cols(), seed + 3);
  const ConvGrads g = conv2d_backward(x, spec, w, up);
  const double eps = 1e-5;
  auto loss = [&] { return dot(up, conv2d_forward(x, spec, w, b)); };

  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x.data()[i];
    x.data()[i] = keep + eps;
    const double lp = loss();
    x.data()[i] = keep - eps;
    const double lm = loss();
    x.data()[i] = keep;
    CHECK(rel(g.input.data()[i], (lp - lm) / (2 * eps)) < tol);
  }
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double keep = w[i];
    w[i] = keep + eps;
    const double lp = loss();
    w[i] = keep - eps;
    const double lm = loss();
    w[i] = keep;
    CHECK(rel(g.weight[i], (lp - lm) / (2 * eps)) < tol);
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double keep = b[i];
    b[i] = keep + eps;
    const double lp = loss();
    b[i] = keep - eps;
    const double lm = loss();
    b[i] = keep;
    CHECK(rel(g.bias[i], (lp - lm) / (2 * eps)) < tol);
  }
}

} // namespace

TEST_CASE("3x3 ones with same padding") {
  Conv2dSpec s;
  s.kernel_h = s.kernel_w = 3;
  s.has_bias = false;
  const Tensor3 x(1, 3, 3, 1.0);
  const std::vector<double> w(9, 1.0);
  const Tensor3 y = conv2d_forward(x, s, w, {});
  REQUIRE(y.rows() == 3);
  REQUIRE(y.cols() == 3);
  CHECK(y(0, 1, 1) == 9.0);
  CHECK(y(0, 0, 0) == 4.0);
  CHECK(y(0, 2, 2) == 4.0);
  CHECK(y(0, 0, 1) == 6.0);
}

TEST_CASE("identity 1x1 and bias broadcast") {
  Conv2dSpec s;
  s.in_channels = s.out_channels = 2;
  const Tensor3 x = random_tensor(2, 4, 5, 1);
  const std::vector<double> eye{1, 0, 0, 1};
  const std::vector<double> zero_bias{0, 0};
  const Tensor3 y = conv2d_forward(x, s, eye, zero_bias);
  CHECK(y.data() == x.data());
  const Tensor3 up = random_tensor(2, 4, 5, 2);
  CHECK(conv2d_backward(x, s, eye, up).input.data() == up.data());

  const Tensor3 z(2, 4, 5, 0.0);
  const std::vector<double> bias{0.25, -2.0};
  const Tensor3 yb = conv2d_forward(z, s, eye, bias);
  for (std::size_t r = 0; r < 4; ++r) {
    CHECK(yb(0, r, 3) == 0.25);
    CHECK(yb(1, r, 0) == -2.0);
  }

  const ConvGrads g0 = conv2d_backward(x, s, eye, Tensor3(2, 4, 5, 0.0));
  for (double v : g0.input.data()) CHECK(v == 0.0);
  for (double v : g0.weight) CHECK(v == 0.0);
  for (double v : g0.bias) CHECK(v == 0.0);
}

TEST_CASE("output geometry") {
  Conv2dSpec s;
  s.in_channels = s.out_channels = 1;
  s.kernel_h = s.kernel_w = 5;
  s.stride_h = 2;
  CHECK(s.pad_h() == 2);
  CHECK(s.out_rows(124) == 62);
  CHECK(s.out_rows(31) == 16);
  CHECK(s.out_cols(7) == 7);
  s.dilation_h = s.dilation_w = 4;
  s.stride_h = 1;
  CHECK(s.pad_h() == 8);
  CHECK(s.out_rows(10) == 10);
  s.same_h = false;
  s.dilation_h = 1;
  s.kernel_h = 16;
  CHECK(s.out_rows(16) == 1);
  CHECK_THROWS_AS(s.out_rows(15), SizeError);
}

TEST_CASE("spec validation") {
  Conv2dSpec s;
  s.kernel_h = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.depthwise = true;
  s.in_channels = 3;
  s.out_channels = 4;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.in_channels = 2;
  CHECK_THROWS_AS(conv2d_forward(Tensor3(3, 4, 4), s, std::vector<double>(2), std::vector<double>(1)),
                  SizeError);
}

TEST_CASE("backward matches finite differences") {
  SUBCASE("dilated 5x5, d=2, 2 channels on 4x4") {
    Conv2dSpec s;
    s.in_channels = 2;
    s.out_channels = 3;
    s.kernel_h = s.kernel_w = 5;
    s.dilation_h = s.dilation_w = 2;
    check_fd(s, 4, 4, 10, 1e-5);
  }
  SUBCASE("depthwise 7x7") {
    Conv2dSpec s;
    s.in_channels = s.out_channels = 3;
    s.depthwise = true;
    s.kernel_h = s.kernel_w = 7;
    check_fd(s, 6, 5, 20, 1e-5);
  }
  SUBCASE("strided") {
    Conv2dSpec s;
    s.in_channels = 2;
    s.out_channels = 2;
    s.kernel_h = s.kernel_w = 5;
    s.stride_h = 2;
    check_fd(s, 7, 4, 30, 1e-5);
  }
  SUBCASE("valid in frequency") {
    Conv2dSpec s;
    s.in_channels = 2;
    s.out_channels = 1;
    s.kernel_h = 4;
    s.kernel_w = 3;
    s.same_h = false;
    check_fd(s, 4, 6, 40, 1e-5);
  }
}

TEST_CASE("leaky relu") {
  Tensor3 x(1, 1, 4);
  x.data() = {-2.0, 0.0, 3.0, -0.5};
  const Tensor3 pre = x;
  leaky_relu_inplace(x, 0.1);
  CHECK(x.data()[0] == doctest::Approx(-0.2));
  CHECK(x.data()[1] == 0.0);
  CHECK(x.data()[2] == 3.0);
  const Tensor3 g = leaky_relu_backward(pre, Tensor3(1, 1, 4, 1.0), 0.1);
  CHECK(g.data() == std::vector<double>{0.1, 0.1, 1.0, 0.1});
}
