#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace harmonika {

// Dense real array laid out [channel][row][col] (channel = harmonic slice or
// feature map, row = frequency, col = time).
class Tensor3 {
public:
  Tensor3() = default;
  Tensor3(std::size_t channels, std::size_t rows, std::size_t cols, double fill = 0.0)
      : c_(channels), h_(rows), w_(cols), data_(channels * rows * cols, fill) {}

  std::size_t channels() const noexcept { return c_; }
  std::size_t rows() const noexcept { return h_; }
  std::size_t cols() const noexcept { return w_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t c, std::size_t r, std::size_t t) {
    return data_[(c * h_ + r) * w_ + t];
  }
  double operator()(std::size_t c, std::size_t r, std::size_t t) const {
    return data_[(c * h_ + r) * w_ + t];
  }

  double* channel(std::size_t c) { return data_.data() + c * h_ * w_; }
  const double* channel(std::size_t c) const { return data_.data() + c * h_ * w_; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool same_shape(const Tensor3& other) const noexcept {
    return c_ == other.c_ && h_ == other.h_ && w_ == other.w_;
  }
  std::string shape_string() const;

private:
  std::size_t c_ = 0;
  std::size_t h_ = 0;
  std::size_t w_ = 0;
  std::vector<double> data_;
};

inline std::string Tensor3::shape_string() const {
  return "[" + std::to_string(c_) + "," + std::to_string(h_) + "," + std::to_string(w_) + "]";
}

} // namespace harmonika
