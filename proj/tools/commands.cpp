#include "commands.hpp"

#include "harmonika/audio.hpp"
#include "harmonika/cepstrum.hpp"
#include "harmonika/checkpoint.hpp"
#include "harmonika/config.hpp"
#include "harmonika/cqt.hpp"
#include "harmonika/discnet.hpp"
#include "harmonika/error.hpp"
#include "harmonika/filterbank.hpp"
#include "harmonika/gradcheck.hpp"
#include "harmonika/pitch.hpp"
#include "harmonika/stft.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

namespace harmonika::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// Tensor CSV dumps are skipped above this size.
constexpr std::size_t kCsvByteLimit = 1 << 20;

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  unsigned jobs = 1;
  std::string dump_config;
};

void init_logging() {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = spdlog::stderr_color_mt("harmonika");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
  });
  const char* env = std::getenv("HARMONIKA_LOG");
  const std::string level = env ? env : "error";
  if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else if (level == "info") {
    spdlog::set_level(spdlog::level::info);
  } else {
    spdlog::set_level(spdlog::level::err);
  }
}

RunConfig resolve_config(const GlobalOptions& g) {
  RunConfig cfg = g.config_path.empty() ? config_from_json("{}") : load_config(g.config_path);
  if (g.seed) cfg.seed = *g.seed;
  return cfg;
}

fs::path out_path(const GlobalOptions& g, const std::string& name) {
  const fs::path dir = g.out_dir.empty() ? fs::path(".") : fs::path(g.out_dir);
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw FormatError("cannot write " + path.string());
  f << text;
}

std::string format_gamma(double g) {
  std::ostringstream os;
  if (g == std::floor(g) && std::abs(g) < 1e15) {
    os.setf(std::ios::fixed);
    os.precision(1);
  } else {
    os.precision(10);
  }
  os << g;
  return os.str();
}

AudioBuffer load_at_rate(const fs::path& path, double rate) {
  AudioBuffer buf = load_wav(path);
  if (buf.sample_rate() != rate) {
    spdlog::info("resampling {} from {} Hz to {} Hz", path.string(), buf.sample_rate(), rate);
    buf = resample(buf, rate);
  }
  return buf;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception
// is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
  const unsigned workers = std::max(1U, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---- bank -----------------------------------------------------------------

struct BankOptions {
  std::string dump;
  std::string csv;
  std::optional<std::size_t> harmonics;
  std::optional<double> f_min;
  bool no_half = false;
};

int cmd_bank(const GlobalOptions& g, const BankOptions& o, std::ostream& out) {
  RunConfig cfg = resolve_config(g);
  if (o.harmonics) cfg.bank.num_harmonics = *o.harmonics;
  if (o.f_min) cfg.bank.f_min = *o.f_min;
  if (o.no_half) cfg.bank.include_half = false;
  const HarmonicFilterBank bank = HarmonicFilterBank::build(cfg.bank);
  fs::path json_path = o.dump;
  fs::path csv_path = o.csv;
  if (!g.out_dir.empty()) {
    if (json_path.empty()) json_path = out_path(g, "bank.json");
    if (csv_path.empty()) csv_path = out_path(g, "bank.csv");
  }
  if (!json_path.empty()) dump_bank_json(bank, json_path);
  if (!csv_path.empty()) dump_bank_csv(bank, csv_path);
  out << "F=" << bank.num_bins() << ", slices=" << bank.num_slices()
      << ", gamma=" << format_gamma(bank.gamma().front()) << '\n';
  return kOk;
}

// ---- analyze --------------------------------------------------------------

struct AnalyzeOptions {
  std::vector<std::string> inputs;
  bool csv = false;
  bool spectrogram = false;
};

int cmd_analyze(const GlobalOptions& g, const AnalyzeOptions& o, std::ostream& out) {
  const RunConfig cfg = resolve_config(g);
  const HarmonicFilterBank bank = HarmonicFilterBank::build(cfg.bank);
  std::vector<std::string> lines(o.inputs.size());
  const fs::path dir = out_path(g, "");

  parallel_for(o.inputs.size(), g.jobs, [&](std::size_t i) {
    const fs::path in = o.inputs[i];
    const AudioBuffer buf = load_at_rate(in, cfg.sample_rate);
    const ComplexSpectrogram spec = stft(buf, cfg.stft);
    const HarmonicTensor tensor = project(bank, spec);
    const std::string stem = in.stem().string();
    write_tensor_f32(tensor, dir / (stem + ".tensor.f32"));
    if (o.csv) {
      if (tensor.values.size() * 12 <= kCsvByteLimit) {
        write_tensor_csv(tensor, dir / (stem + ".tensor.csv"));
      } else {
        spdlog::warn("{}: tensor too large for CSV, wrote binary only", stem);
      }
    }
    if (o.spectrogram) dump_spectrogram_csv(spec, dir / (stem + ".spec.csv"));

    double peak = 0.0;
    for (double v : tensor.values.data()) peak = std::max(peak, v);
    std::ostringstream line;
    line << stem << ": shape " << tensor.values.shape_string() << ", max " << peak;
    lines[i] = line.str();
  });
  for (const auto& l : lines) out << l << '\n';
  return kOk;
}

// ---- discriminate ---------------------------------------------------------

struct DiscriminateOptions {
  std::vector<std::string> inputs;
  std::string params;
  std::string save_params;
  std::string census;
  bool dump = false;
};

ordered_json census_json(const ParamCensus& c) {
  ordered_json layers = ordered_json::object();
  for (const auto& [name, n] : c.layers) layers[name] = n;
  return {{"layers", layers}, {"gamma", c.gamma}, {"total", c.total}};
}

ordered_json shape_json(const Tensor3& t) {
  return ordered_json::array({t.channels(), t.rows(), t.cols()});
}

int cmd_discriminate(const GlobalOptions& g, const DiscriminateOptions& o, std::ostream& out) {
  const RunConfig cfg = resolve_config(g);
  const HarmonicFilterBank bank = HarmonicFilterBank::build(cfg.bank);
  const NetConfig net = cfg.net_for(bank);

  DiscriminatorParams params;
  if (!o.params.empty()) {
    Checkpoint ck = load_checkpoint(o.params);
    if (!(ck.params.config == net)) {
      throw ConfigError("checkpoint network shape does not match the configuration");
    }
    if (ck.params.gamma.size() != bank.gamma().size()) {
      throw ConfigError("checkpoint gamma count does not match the configuration");
    }
    params = std::move(ck.params);
  } else {
    params = init_params(net, cfg.seed, bank.gamma().size());
  }
  if (!o.save_params.empty()) save_checkpoint(o.save_params, params, cfg.seed);

  const ParamCensus census = param_census(params);
  if (!o.census.empty()) write_text(o.census, census_json(census).dump(2) + "\n");

  std::vector<ordered_json> reports(o.inputs.size());
  parallel_for(o.inputs.size(), g.jobs, [&](std::size_t i) {
    const fs::path in = o.inputs[i];
    const AudioBuffer buf = load_at_rate(in, cfg.sample_rate);
    const MagnitudeSpectrogram mag = MagnitudeSpectrogram::from(stft(buf, cfg.stft));
    const DiscriminatorOutput res = forward(bank, mag, params);

    const auto& s = res.score.data();
    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (double v : s) {
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    ordered_json r;
    r["input"] = in.filename().string();
    r["frames"] = res.score.cols();
    r["score"] = {{"mean", sum / static_cast<double>(s.size())}, {"min", lo}, {"max", hi}};
    r["features"] = ordered_json::array();
    for (const auto& f : res.features) r["features"].push_back(shape_json(f));
    r["census_total"] = census.total;
    if (o.dump) {
      r["score_values"] = s;
    }
    reports[i] = std::move(r);
  });

  for (std::size_t i = 0; i < reports.size(); ++i) {
    const std::string text = reports[i].dump(2);
    out << text << '\n';
    if (!g.out_dir.empty()) {
      const std::string stem = fs::path(o.inputs[i]).stem().string();
      write_text(out_path(g, stem + ".discriminate.json"), text + "\n");
    }
  }
  return kOk;
}

// ---- gradcheck ------------------------------------------------------------

struct GradcheckCliOptions {
  std::string size = "tiny";
  bool corrupt = false;
};

int cmd_gradcheck(const GlobalOptions& g, const GradcheckCliOptions& o, std::ostream& out) {
  const RunConfig cfg = resolve_config(g);
  GradcheckOptions opt;
  opt.size = o.size == "small" ? GradcheckSize::small : GradcheckSize::tiny;
  opt.seed = cfg.seed;
  if (o.corrupt) {
    opt.tamper = [](GradBundle& gb) {
      for (double& w : gb.params.hcb_normal.weight) w *= 1.5;
      for (double& b : gb.params.final.bias) b += 1e-2;
    };
  }
  const GradcheckReport report = run_gradcheck(opt);
  char line[200];
  for (const auto& e : report.entries) {
    std::snprintf(line, sizeof line, "%-6s %-34s n=%-5zu max_rel=%.3e %s\n", e.suite.c_str(),
                  e.name.c_str(), e.checked, e.max_rel_error, e.pass ? "ok" : "FAIL");
    out << line;
  }
  std::snprintf(line, sizeof line, "%s max_rel_error=%.6e tolerance=%.0e\n",
                report.pass ? "PASS" : "FAIL", report.max_rel_error, opt.tolerance);
  out << line;
  if (!report.pass) {
    out << "offending parameters:";
    for (const auto& e : report.entries) {
      if (!e.pass) out << ' ' << e.name << '[' << e.worst_index << ']';
    }
    out << '\n';
  }
  return report.pass ? kOk : kCheckFailed;
}

// ---- gridcmp --------------------------------------------------------------

int cmd_gridcmp(const GlobalOptions& g, std::ostream& out) {
  const RunConfig cfg = resolve_config(g);
  const HarmonicFilterBank bank = HarmonicFilterBank::build(cfg.bank);
  const std::size_t h_max = cfg.bank.num_harmonics;
  const double b = static_cast<double>(cfg.bank.bins_per_octave);
  // Enough CQT bins to reach the highest harmonic of the lowest bin.
  const auto cqt_bins =
      static_cast<std::size_t>(std::ceil(b * std::log2(static_cast<double>(h_max)))) + 1;
  const CqtGrid grid = make_cqt_grid(cfg.bank.f_min, cfg.bank.bins_per_octave, cqt_bins,
                                     cfg.sample_rate);
  const std::size_t fundamental = bank.slice_of(1.0);

  std::ostringstream csv;
  csv << "h,cqt_distance_octaves,cqt_exact,harmonic_bank_exact\n";
  char line[128];
  for (std::size_t h = 1; h <= h_max; ++h) {
    const double dist = cqt_harmonic_coverage(grid, static_cast<unsigned>(h));
    const std::size_t slice = bank.slice_of(static_cast<double>(h));
    bool exact = true;
    for (std::size_t k = 0; k < bank.num_bins(); ++k) {
      exact = exact && bank.center(slice, k) / bank.center(fundamental, k) == static_cast<double>(h);
    }
    std::snprintf(line, sizeof line, "%zu,%.8f,%d,%d\n", h, dist, dist == 0.0 ? 1 : 0, exact ? 1 : 0);
    csv << line;
  }
  out << csv.str();
  if (!g.out_dir.empty()) write_text(out_path(g, "gridcmp.csv"), csv.str());
  return kOk;
}

// ---- metrics --------------------------------------------------------------

struct MetricsOptions {
  std::string ref;
  std::string est;
  std::string contours;
};

int cmd_metrics(const GlobalOptions& g, const MetricsOptions& o, std::ostream& out) {
  const RunConfig cfg = resolve_config(g);
  const AudioBuffer ref = load_at_rate(o.ref, cfg.sample_rate);
  const AudioBuffer est = load_at_rate(o.est, cfg.sample_rate);

  const PitchContour ref_f0 = extract_f0(ref, cfg.pitch);
  const PitchContour est_f0 = extract_f0(est, cfg.pitch);
  if (!o.contours.empty()) {
    fs::create_directories(o.contours);
    write_contour_csv(ref_f0, fs::path(o.contours) / "ref_f0.csv");
    write_contour_csv(est_f0, fs::path(o.contours) / "est_f0.csv");
  }

  MetricReport report;
  report.mcd_db = mcd(mel_cepstrum(ref, cfg.cepstrum), mel_cepstrum(est, cfg.cepstrum));
  const F0Comparison cmp = f0rmse(ref_f0, est_f0);
  report.f0rmse = cmp.f0rmse;
  report.voiced_agreement = cmp.voiced_agreement;

  const std::string text = metric_report_json(report);
  out << text << '\n';
  if (!g.out_dir.empty()) write_text(out_path(g, "metrics.json"), text + "\n");
  return kOk;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  init_logging();
  CLI::App app{"Harmonic filter bank and discriminator toolkit", "harmonika"};
  app.require_subcommand(0, 1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed (overrides the config)");
  app.add_option("--out", g.out_dir, "Output directory");
  app.add_option("--jobs", g.jobs, "Parallel jobs over input files")->check(CLI::PositiveNumber);
  app.add_option("--dump-config", g.dump_config, "Write the effective configuration as JSON");

  BankOptions bank_opt;
  auto* bank = app.add_subcommand("bank", "Describe the harmonic filter bank");
  bank->add_option("--dump", bank_opt.dump, "Bank description JSON path");
  bank->add_option("--csv", bank_opt.csv, "Per-slice centre/bandwidth table path");
  bank->add_option("--harmonics", bank_opt.harmonics, "Number of integer harmonics H");
  bank->add_option("--f-min", bank_opt.f_min, "Lowest base frequency in Hz");
  bank->add_flag("--no-half", bank_opt.no_half, "Drop the half-harmonic slice");

  AnalyzeOptions an_opt;
  auto* analyze = app.add_subcommand("analyze", "WAV -> harmonic tensor dump");
  analyze->add_option("wav", an_opt.inputs, "Input WAV file(s)")->required()->check(CLI::ExistingFile);
  analyze->add_flag("--csv", an_opt.csv, "Also write a CSV tensor (small tensors only)");
  analyze->add_flag("--spectrogram", an_opt.spectrogram, "Also dump the STFT magnitude CSV");

  DiscriminateOptions d_opt;
  auto* disc = app.add_subcommand("discriminate", "Run the discriminator on WAV file(s)");
  disc->add_option("wav", d_opt.inputs, "Input WAV file(s)")->required()->check(CLI::ExistingFile);
  disc->add_option("--params", d_opt.params, "Parameter checkpoint");
  disc->add_option("--save-params", d_opt.save_params, "Write the parameters used");
  disc->add_option("--census", d_opt.census, "Write the parameter census JSON");
  disc->add_flag("--dump", d_opt.dump, "Include every score value in the summary");

  GradcheckCliOptions gc_opt;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of all backward passes");
  grad->add_option("--size", gc_opt.size, "Problem size")->check(CLI::IsMember({"tiny", "small"}));
  grad->add_flag("--corrupt-backward", gc_opt.corrupt, "Tamper with gradients (negative control)");

  auto* grid = app.add_subcommand("gridcmp", "Compare CQT and harmonic-bank grids");

  MetricsOptions m_opt;
  auto* metrics = app.add_subcommand("metrics", "MCD and F0RMSE between two WAV files");
  metrics->add_option("ref", m_opt.ref, "Reference WAV")->required()->check(CLI::ExistingFile);
  metrics->add_option("est", m_opt.est, "Estimated WAV")->required()->check(CLI::ExistingFile);
  metrics->add_option("--contours", m_opt.contours, "Directory for pitch contour CSVs");

  std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
  try {
    app.parse(std::move(rev));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kInputError;
  }

  try {
    if (!g.dump_config.empty()) write_text(g.dump_config, config_to_json(resolve_config(g)) + "\n");
    if (*bank) return cmd_bank(g, bank_opt, out);
    if (*analyze) return cmd_analyze(g, an_opt, out);
    if (*disc) return cmd_discriminate(g, d_opt, out);
    if (*grad) return cmd_gradcheck(g, gc_opt, out);
    if (*grid) return cmd_gridcmp(g, out);
    if (*metrics) return cmd_metrics(g, m_opt, out);
    if (g.dump_config.empty()) out << app.help();
    return kOk;
  } catch (const DegenerateDataError& e) {
    err << "error: " << e.what() << '\n';
    return kDegenerateData;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
}

} // namespace harmonika::cli
