#include "harmonika/cqt.hpp"

#include "harmonika/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace harmonika {

double CqtGrid::center(std::size_t k) const {
  return f_min * std::exp2(static_cast<double>(k) / static_cast<double>(bins_per_octave));
}

CqtGrid make_cqt_grid(double f_min, std::size_t bins_per_octave,
                      std::size_t num_bins, double sample_rate) {
  if (!(f_min > 0.0) || bins_per_octave == 0 || num_bins == 0 || !(sample_rate > 0.0)) {
    throw ConfigError("CQT grid needs f_min > 0, B >= 1, num_bins >= 1, f_s > 0");
  }
  CqtGrid grid;
  grid.f_min = f_min;
  grid.bins_per_octave = bins_per_octave;
  grid.num_bins = num_bins;
  grid.sample_rate = sample_rate;
  grid.q_factor = 1.0 / (std::exp2(1.0 / static_cast<double>(bins_per_octave)) - 1.0);
  grid.window_lengths.resize(num_bins);
  for (std::size_t k = 0; k < num_bins; ++k) {
    const double len = std::ceil(grid.q_factor * sample_rate / grid.center(k));
    grid.window_lengths[k] = static_cast<std::size_t>(std::max(1.0, len));
    if (k > 0 && grid.window_lengths[k] >= grid.window_lengths[k - 1]) {
      throw ConfigError("CQT window lengths stop decreasing at bin " +
                        std::to_string(k) + "; lower B or num_bins");
    }
  }
  return grid;
}

namespace {

double reflected(const std::vector<double>& x, std::ptrdiff_t i) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  if (n == 1) return x[0];
  const std::ptrdiff_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  if (i >= n) i = period - i;
  return x[static_cast<std::size_t>(i)];
}

} // namespace

CqtResult cqt(const AudioBuffer& buf, const CqtGrid& grid, std::size_t hop) {
  if (hop == 0) {
    throw ConfigError("CQT hop must be positive");
  }
  if (buf.sample_rate() != grid.sample_rate) {
    throw ConfigError("CQT grid built for " + std::to_string(grid.sample_rate) +
                      " Hz, buffer is " + std::to_string(buf.sample_rate()) + " Hz");
  }
  const double nyquist = grid.sample_rate / 2.0;
  for (std::size_t k = 0; k < grid.num_bins; ++k) {
    if (grid.center(k) * (1.0 + 1.0 / (2.0 * grid.q_factor)) > nyquist) {
      throw NyquistError("CQT bin " + std::to_string(k) + " at " +
                         std::to_string(grid.center(k)) + " Hz exceeds Nyquist");
    }
  }
  const std::size_t longest = grid.window_lengths.front();
  if (buf.size() < longest) {
    throw SizeError("buffer of " + std::to_string(buf.size()) +
                    " samples is shorter than the longest CQT window (" +
                    std::to_string(longest) + ")");
  }

  const auto& x = buf.samples();
  CqtResult out;
  out.bins = grid.num_bins;
  out.frames = 1 + x.size() / hop;
  out.values.assign(out.bins * out.frames, {});

  for (std::size_t k = 0; k < grid.num_bins; ++k) {
    const std::size_t len = grid.window_lengths[k];
    const double inv_len = 1.0 / static_cast<double>(len);
    // Kernel (1/N_k) w(n) e^{-j 2 pi Q n / N_k}
    std::vector<std::complex<double>> kernel(len);
    for (std::size_t n = 0; n < len; ++n) {
      const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) * inv_len);
      const double phase = -2.0 * std::numbers::pi * grid.q_factor * static_cast<double>(n) * inv_len;
      kernel[n] = inv_len * w * std::polar(1.0, phase);
    }
    const auto half = static_cast<std::ptrdiff_t>(len / 2);
    for (std::size_t t = 0; t < out.frames; ++t) {
      const auto start = static_cast<std::ptrdiff_t>(t * hop) - half;
      std::complex<double> acc{};
      for (std::size_t n = 0; n < len; ++n) {
        acc += reflected(x, start + static_cast<std::ptrdiff_t>(n)) * kernel[n];
      }
      out.values[k * out.frames + t] = acc;
    }
  }
  return out;
}

double cqt_harmonic_coverage(const CqtGrid& grid, unsigned h) {
  if (h == 0) {
    throw ConfigError("harmonic order must be >= 1");
  }
  // log2(h f_0) - log2(f_min 2^{k/B}) = log2(h) - k/B
  const double target = std::log2(static_cast<double>(h));
  const double b = static_cast<double>(grid.bins_per_octave);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grid.num_bins; ++k) {
    best = std::min(best, std::abs(target - static_cast<double>(k) / b));
  }
  return best;
}

} // namespace harmonika
