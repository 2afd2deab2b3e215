#pragma once

#include "harmonika/cepstrum.hpp"

#include <cmath>
#include <cstddef>
#include <limits>

namespace testing {

struct BruteDtw {
  double cost = std::numeric_limits<double>::infinity();
  std::size_t length = 0;
};

namespace detail {

inline double frame_dist(const harmonika::CepstralTrack& a, std::size_t i,
                         const harmonika::CepstralTrack& b, std::size_t j) {
  double acc = 0.0;
  for (std::size_t c = 0; c < a.coeffs; ++c) {
    const double d = a.frame(i)[c] - b.frame(j)[c];
    acc += d * d;
  }
  return std::sqrt(acc);
}

inline void walk(const harmonika::CepstralTrack& a, const harmonika::CepstralTrack& b,
                 std::size_t i, std::size_t j, double cost, std::size_t len, BruteDtw& best) {
  cost += frame_dist(a, i, b, j);
  ++len;
  if (i + 1 == a.frames && j + 1 == b.frames) {
    if (cost < best.cost - 1e-12 || (std::abs(cost - best.cost) <= 1e-12 && len < best.length)) {
      best = {cost, len};
    }
    return;
  }
  if (i + 1 < a.frames) walk(a, b, i + 1, j, cost, len, best);
  if (j + 1 < b.frames) walk(a, b, i, j + 1, cost, len, best);
  if (i + 1 < a.frames && j + 1 < b.frames) walk(a, b, i + 1, j + 1, cost, len, best);
}

} // namespace detail

// Enumerates every monotone alignment path (right, down, diagonal). Returns
// the minimum total cost and the shortest length among minimum-cost paths.
inline BruteDtw brute_force_dtw(const harmonika::CepstralTrack& a,
                                const harmonika::CepstralTrack& b) {
  BruteDtw best;
  detail::walk(a, b, 0, 0, 0.0, 0, best);
  return best;
}

} // namespace testing
