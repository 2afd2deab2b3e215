#pragma once

#include "harmonika/discnet.hpp"
#include "harmonika/filterbank.hpp"
#include "harmonika/stft.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace harmonika {

enum class GradcheckSize { tiny, small };

// Problem sizes used by the finite-difference suites.
struct GradcheckSetup {
  HarmonicBankConfig bank;
  StftConfig stft;
  std::size_t samples = 0;  // synthetic audio length feeding the gamma suite
  NetConfig net;
  std::size_t frames = 0;
  double gamma = 1.3;
  // Parameters checked per layer; 0 checks every one.
  std::size_t max_checks_per_layer = 0;
};

GradcheckSetup gradcheck_setup(GradcheckSize size);

struct GradcheckOptions {
  GradcheckSize size = GradcheckSize::tiny;
  std::uint64_t seed = 0;
  double eps = 1e-5;
  double tolerance = 1e-4;
  // Applied to every analytic gradient before comparison; lets callers
  // confirm the checker catches a broken backward pass.
  std::function<void(GradBundle&)> tamper;
};

struct GradcheckEntry {
  std::string suite;
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  bool pass = true;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double max_rel_error = 0.0;
  bool pass = true;
};

// |a - n| / max(|a|, |n|, 1e-6)
double gradcheck_relative_error(double analytic, double numeric);

// Central-difference checks of every conv layer type, the HCB, MDC and final
// layers of the whole network, the input gradient and gamma (global and
// per-slice).
GradcheckReport run_gradcheck(const GradcheckOptions& options);

} // namespace harmonika
