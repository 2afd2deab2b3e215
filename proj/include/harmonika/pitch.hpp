#pragma once

#include "harmonika/audio.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace harmonika {

struct PitchConfig {
  double f_floor = 50.0;
  double f_ceil = 1100.0;
  std::size_t frame_size = 2048;
  std::size_t hop_size = 256;
  double voicing_threshold = 0.5;
  double silence_rms = 1e-4;
};

struct PitchFrame {
  double time_s = 0.0;
  double f0_hz = 0.0;  // 0 = unvoiced
};

struct PitchContour {
  std::vector<PitchFrame> frames;
  double frame_hop_s = 0.0;
};

// Normalized-autocorrelation F0 tracker. Frames are centred on t * hop
// (reflect padding). The lag search spans [f_s/f_ceil, f_s/f_floor]; the
// earliest local maximum within 90% of the best one is refined by parabolic
// interpolation. A frame is unvoiced when that peak is below the voicing
// threshold or its RMS is below `silence_rms`.
//
// Throws ConfigError unless f_s >= 4 f_ceil and 0 < f_floor < f_ceil.
PitchContour extract_f0(const AudioBuffer& buf, const PitchConfig& cfg = {});

struct F0Comparison {
  double f0rmse = 0.0;            // Hz, over co-voiced frames
  double voiced_agreement = 0.0;  // fraction of frames with equal voicing
  std::size_t co_voiced = 0;
  std::size_t frames = 0;
};

// The longer contour is truncated to the shorter one. Throws ConfigError on
// differing hops and DegenerateDataError when no frame is voiced in both.
F0Comparison f0rmse(const PitchContour& ref, const PitchContour& est);

// "time_s,f0_hz" rows with a header line.
void write_contour_csv(const PitchContour& contour, const std::filesystem::path& path);

struct MetricReport {
  double mcd_db = 0.0;
  double f0rmse = 0.0;
  double voiced_agreement = 0.0;
};

std::string metric_report_json(const MetricReport& report);

} // namespace harmonika
