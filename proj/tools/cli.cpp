#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>

#include <CLI11.hpp>

#include "mmiq/core.hpp"
#include "mmiq/dipmodel.hpp"
#include "mmiq/errors.hpp"
#include "mmiq/interference.hpp"
#include "mmiq/io.hpp"
#include "mmiq/reconstruct.hpp"

namespace mmiq::cli {

namespace {

using io::json;

class UsageError : public Error {
 public:
  using Error::Error;
};

// Raised after a numerical failure has already been reported.
class NumericalExit : public Error {
 public:
  using Error::Error;
};

struct Sink {
  std::ostream& out;
  std::ostream& err;

  void emit(const std::string& path, const std::string& payload) const {
    if (path.empty())
      out << payload;
    else
      io::write_file(path, payload);
  }

  void echo(const json& config) const { err << "config " << config.dump() << "\n"; }
};

ModePair pair_from(const std::vector<int>& v, const char* flag) {
  if (v.size() != 2) throw UsageError(std::string(flag) + " takes two labels, e.g. 1,2");
  try {
    return make_mode_pair(v[0], v[1]);
  } catch (const ValidationError& e) {
    throw UsageError(std::string(flag) + ": " + e.what());
  }
}

TransitionMatrix load_matrix(const std::string& path) {
  return io::matrix_from_json(io::parse_json(io::read_file(path)));
}

std::vector<double> delay_grid(const std::string& text) {
  double start = 0, stop = 0, step = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%lf:%lf:%lf%c", &start, &stop, &step, &tail) != 3)
    throw UsageError("--delays expects start:stop:step in micrometres");
  if (!(step > 0.0) || !(stop > start))
    throw UsageError("--delays needs stop > start and a positive step");
  std::vector<double> delays;
  const auto n = static_cast<long long>(std::floor((stop - start) / step + 1e-9));
  for (long long i = 0; i <= n; ++i) delays.push_back(start + static_cast<double>(i) * step);
  return delays;
}

// ---------------------------------------------------------------- ideal

struct IdealArgs {
  std::string kind;
  std::optional<double> theta;
  std::string out;
};

void cmd_ideal(const IdealArgs& a, const Sink& sink) {
  json config = {{"command", "ideal"}, {"kind", a.kind}};
  TransitionMatrix m = ideal_2x2();
  if (a.kind == "4x4") {
    if (!a.theta) throw UsageError("ideal --kind 4x4 requires --theta");
    config["theta"] = *a.theta;
    m = ideal_4x4(*a.theta);
  } else if (a.theta) {
    throw UsageError("--theta only applies to --kind 4x4");
  }
  sink.echo(config);
  json payload = io::to_json(m);
  payload["config"] = config;
  sink.emit(a.out, io::dump(payload));
}

// ----------------------------------------------------------- visibility

struct VisibilityArgs {
  std::string matrix;
  double c_min = kDefaultCMin;
  std::string out;
  std::string magnitudes_out;
};

void cmd_visibility(const VisibilityArgs& a, const Sink& sink) {
  const json config = {{"command", "visibility"}, {"matrix", a.matrix}, {"c_min", a.c_min}};
  sink.echo(config);
  const auto m = load_matrix(a.matrix);
  json payload = io::to_json(visibility_matrix(m, a.c_min));
  payload["config"] = config;
  sink.emit(a.out, io::dump(payload));
  if (!a.magnitudes_out.empty())
    io::write_file(a.magnitudes_out, io::dump(io::to_json(magnitudes_of(m))));
}

// --------------------------------------------------------- distribution

struct DistributionArgs {
  std::string matrix;
  std::vector<int> input;
  std::string mode = "quantum";
  std::string out;
};

void cmd_distribution(const DistributionArgs& a, const Sink& sink) {
  const json config = {{"command", "distribution"},
                       {"matrix", a.matrix},
                       {"input", a.input},
                       {"mode", a.mode}};
  sink.echo(config);
  const auto m = load_matrix(a.matrix);
  const auto stats = a.mode == "classical" ? Statistics::classical : Statistics::quantum;
  PhotonConfiguration input;
  try {
    input = make_configuration(a.input);
  } catch (const ValidationError& e) {
    throw UsageError(std::string("--input: ") + e.what());
  }
  const auto dist = output_distribution(m, input, stats);
  json payload = {{"input", a.input}, {"mode", a.mode}, {"distribution", io::to_json(dist)},
                  {"config", config}};
  sink.emit(a.out, io::dump(payload));
}

// ------------------------------------------------------------------ dip

struct DipArgs {
  std::string matrix;
  std::vector<int> inputs{1, 2};
  std::vector<int> outputs{1, 2};
  std::vector<double> filters_nm{2.0, 2.0};
  double wavelength_nm = 804.0;
  double jitter_fs = 0.0;
  double source_visibility = 1.0;
  double scale = 1000.0;
  double slope = 0.0;
  double accidentals = 0.0;
  std::string delays = "-1500:1500:10";
  std::optional<std::uint64_t> seed;
  std::string fit;
  bool correct_accidentals = false;
  std::string out;
};

void cmd_dip(const DipArgs& a, const Sink& sink, bool synthesis_flags_given) {
  if (!a.fit.empty()) {
    if (synthesis_flags_given || !a.matrix.empty())
      throw UsageError("dip: choose synthesis (--matrix ...) or --fit, not both");
    const json config = {{"command", "dip"},
                         {"fit", a.fit},
                         {"correct_accidentals", a.correct_accidentals}};
    sink.echo(config);
    auto trace = io::trace_from_csv(io::read_file(a.fit));
    if (a.correct_accidentals) trace = correct_accidentals(trace);
    try {
      json payload = io::to_json(fit_dip(trace));
      payload["config"] = config;
      sink.emit(a.out, io::dump(payload));
    } catch (const FitFailure& e) {
      sink.err << "fit failed: " << e.what() << "; best residual rms "
               << io::format_double(e.best_residual()) << " over " << trace.samples.size()
               << " samples\n";
      throw NumericalExit(e.what());
    }
    return;
  }
  if (a.correct_accidentals) throw UsageError("--correct-accidentals only applies with --fit");
  if (a.matrix.empty()) throw UsageError("dip needs --matrix for synthesis or --fit trace.csv");
  if (a.filters_nm.size() != 2) throw UsageError("--filters takes two bandwidths in nm");

  TraceSynthesis synth;
  synth.inputs = pair_from(a.inputs, "--inputs");
  synth.outputs = pair_from(a.outputs, "--outputs");
  synth.setup = {a.wavelength_nm * 1e-3, a.filters_nm[0] * 1e-3, a.filters_nm[1] * 1e-3};
  synth.jitter_sigma_s = a.jitter_fs * 1e-15;
  synth.source_visibility = a.source_visibility;
  synth.scale = a.scale;
  synth.slope = a.slope;
  synth.accidental_rate = a.accidentals;
  synth.delays_um = delay_grid(a.delays);
  synth.noise_seed = a.seed;

  json config = {{"command", "dip"},
                 {"matrix", a.matrix},
                 {"inputs", a.inputs},
                 {"outputs", a.outputs},
                 {"filters_nm", a.filters_nm},
                 {"wavelength_nm", a.wavelength_nm},
                 {"jitter_fs", a.jitter_fs},
                 {"source_visibility", a.source_visibility},
                 {"scale", a.scale},
                 {"slope", a.slope},
                 {"accidentals", a.accidentals},
                 {"delays", a.delays},
                 {"seed", a.seed ? json(*a.seed) : json(nullptr)}};
  sink.echo(config);
  const auto m = load_matrix(a.matrix);
  sink.emit(a.out, io::trace_to_csv(synthesize_trace(m, synth)));
}

// ---------------------------------------------------------- reconstruct

struct ReconstructArgs {
  std::string visibilities;
  std::string magnitudes;
  std::string mode = "fixed";
  ReconstructionOptions options;
  std::optional<double> accept_threshold;
  std::string out;
};

int cmd_reconstruct(ReconstructArgs a, const Sink& sink) {
  if (a.options.starts < 1) throw UsageError("--starts must be at least 1");
  a.options.mode = a.mode == "joint" ? ReconstructionMode::joint_refinement
                                     : ReconstructionMode::fixed_magnitudes;
  json config = {{"command", "reconstruct"},
                 {"visibilities", a.visibilities},
                 {"magnitudes", a.magnitudes},
                 {"accept_threshold",
                  a.accept_threshold ? json(*a.accept_threshold) : json(nullptr)},
                 {"options", io::to_json(a.options)}};
  // Worker count changes nothing in the payload, so it is echoed only here.
  json echoed = config;
  echoed["threads"] = a.options.threads;
  sink.echo(echoed);

  const auto measured = io::visibility_from_json(io::parse_json(io::read_file(a.visibilities)));
  const auto mags = io::magnitudes_from_json(io::parse_json(io::read_file(a.magnitudes)));
  std::optional<ReconstructionResult> solved;
  try {
    solved.emplace(reconstruct(measured, mags, a.options));
  } catch (const ShapeError& e) {
    throw UsageError(e.what());
  }
  const ReconstructionResult& result = *solved;
  json payload = io::to_json(result, measured);
  payload["config"] = config;
  sink.emit(a.out, io::dump(payload));
  if (result.underdetermined)
    sink.err << "warning: fewer usable visibility cells than free parameters\n";
  if (!result.alternative_solutions.empty())
    sink.err << "note: " << result.alternative_solutions.size()
             << " gauge-inequivalent zero-objective solution(s) recorded\n";
  if (a.accept_threshold && !(result.objective < *a.accept_threshold)) {
    sink.err << "objective " << io::format_double(result.objective)
             << " is not below the acceptance threshold\n";
    return kNumerical;
  }
  return kSuccess;
}

// --------------------------------------------------------------- report

struct ReportArgs {
  std::string result;
  std::string out;
};

std::string fixed(double v, int precision) {
  if (!std::isfinite(v)) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string cell(const json& v, int precision) {
  return v.is_number() ? fixed(v.get<double>(), precision) : std::string("-");
}

std::string pair_text(const json& p) {
  return "(" + std::to_string(p[0].get<int>()) + "," + std::to_string(p[1].get<int>()) + ")";
}

void cmd_report(const ReportArgs& a, const Sink& sink) {
  sink.echo({{"command", "report"}, {"result", a.result}});
  const json r = io::parse_json(io::read_file(a.result));
  if (!r.is_object() || !r.contains("matrix") || !r.contains("residuals"))
    throw ParseError("report expects a reconstruction result JSON");
  const auto m = io::matrix_from_json(r.at("matrix"));

  std::string text;
  text += "objective (RMS visibility distance): " + io::format_double(r.value("objective", 0.0)) +
          "\n";
  text += "best start: " + std::to_string(r.value("best_start", 0)) + " of " +
          std::to_string(r.value("per_start_objectives", json::array()).size()) + "\n";
  text += "\nreconstructed matrix, magnitude and phase (rad), canonical gauge:\n";
  for (int i = 1; i <= m.n_inputs(); ++i) {
    text += "  ";
    for (int k = 1; k <= m.n_outputs(); ++k) {
      const Complex z = m.at(i, k);
      char buf[64];
      std::snprintf(buf, sizeof buf, "%8.4f @ %+7.4f", std::abs(z), std::arg(z));
      text += buf;
      text += k < m.n_outputs() ? "   " : "\n";
    }
  }
  text += "\nresiduals, largest first:\n";
  text += "  input  output   measured  reconstructed  residual  included\n";
  for (const auto& row : r.at("residuals")) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "  %-6s %-7s %9s  %13s  %8s  %s\n",
                  pair_text(row.at("input")).c_str(), pair_text(row.at("output")).c_str(),
                  cell(row.at("measured"), 4).c_str(), cell(row.at("reconstructed"), 4).c_str(),
                  cell(row.at("residual"), 4).c_str(), row.value("included", false) ? "yes" : "no");
    text += buf;
  }
  sink.emit(a.out, text);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multiport two-photon interference simulation and characterisation", "mmiq"};
  app.require_subcommand(1);
  const Sink sink{out, err};

  IdealArgs ideal;
  auto* ideal_cmd = app.add_subcommand("ideal", "Write an ideal MMI transition matrix");
  ideal_cmd->add_option("--kind", ideal.kind, "2x2 or 4x4")
      ->required()
      ->check(CLI::IsMember({"2x2", "4x4"}));
  ideal_cmd->add_option("--theta", ideal.theta, "internal phase of the 4x4 splitter (rad)");
  ideal_cmd->add_option("--out", ideal.out, "output path (stdout if omitted)");

  VisibilityArgs vis;
  auto* vis_cmd = app.add_subcommand("visibility", "Two-photon visibility matrix of a device");
  vis_cmd->add_option("--matrix", vis.matrix, "matrix JSON")->required();
  vis_cmd->add_option("--c-min", vis.c_min, "classical-probability floor")->capture_default_str();
  vis_cmd->add_option("--out", vis.out, "output path (stdout if omitted)");
  vis_cmd->add_option("--magnitudes-out", vis.magnitudes_out, "also write |M| as magnitudes JSON");

  DistributionArgs dist;
  auto* dist_cmd = app.add_subcommand("distribution", "Exact multiphoton output distribution");
  dist_cmd->add_option("--matrix", dist.matrix, "matrix JSON")->required();
  dist_cmd->add_option("--input", dist.input, "occupation per input mode, e.g. 1,1,0,0")
      ->required()
      ->delimiter(',');
  dist_cmd->add_option("--mode", dist.mode, "quantum or classical")
      ->check(CLI::IsMember({"quantum", "classical"}))
      ->capture_default_str();
  dist_cmd->add_option("--out", dist.out, "output path (stdout if omitted)");

  DipArgs dip;
  auto* dip_cmd = app.add_subcommand("dip", "Synthesise a delay scan or fit a measured one");
  dip_cmd->add_option("--matrix", dip.matrix, "matrix JSON (synthesis)");
  std::vector<CLI::Option*> synthesis_flags = {
      dip_cmd->add_option("--inputs", dip.inputs, "input pair")->delimiter(','),
      dip_cmd->add_option("--outputs", dip.outputs, "output pair")->delimiter(','),
      dip_cmd->add_option("--filters", dip.filters_nm, "filter FWHM per photon (nm)")
          ->delimiter(','),
      dip_cmd->add_option("--wavelength", dip.wavelength_nm, "centre wavelength (nm)"),
      dip_cmd->add_option("--jitter-fs", dip.jitter_fs, "relative-delay jitter sigma (fs)"),
      dip_cmd->add_option("--source-visibility", dip.source_visibility, "source visibility"),
      dip_cmd->add_option("--scale", dip.scale, "counts per unit probability"),
      dip_cmd->add_option("--slope", dip.slope, "linear drift (counts/um)"),
      dip_cmd->add_option("--accidentals", dip.accidentals, "accidental counts per sample"),
      dip_cmd->add_option("--delays", dip.delays, "start:stop:step in um"),
      dip_cmd->add_option("--seed", dip.seed, "Poisson noise seed (noise-free if omitted)"),
  };
  dip_cmd->add_option("--fit", dip.fit, "trace CSV to fit");
  dip_cmd->add_flag("--correct-accidentals", dip.correct_accidentals,
                    "subtract the accidentals column before fitting");
  dip_cmd->add_option("--out", dip.out, "output path (stdout if omitted)");

  ReconstructArgs rec;
  auto* rec_cmd = app.add_subcommand("reconstruct", "Recover a transition matrix from |M| and V");
  rec_cmd->add_option("--visibilities", rec.visibilities, "visibility JSON")->required();
  rec_cmd->add_option("--magnitudes", rec.magnitudes, "magnitudes JSON")->required();
  rec_cmd->add_option("--mode", rec.mode, "fixed or joint")
      ->check(CLI::IsMember({"fixed", "joint"}))
      ->capture_default_str();
  rec_cmd->add_option("--penalty-weight", rec.options.magnitude_penalty_weight,
                      "magnitude penalty weight (joint mode)")
      ->capture_default_str();
  rec_cmd->add_option("--starts", rec.options.starts, "number of descents")->capture_default_str();
  rec_cmd->add_option("--seed", rec.options.seed, "seed for random starts")->capture_default_str();
  rec_cmd->add_option("--max-iterations", rec.options.max_iterations)->capture_default_str();
  rec_cmd->add_option("--tol", rec.options.convergence_tol, "objective-change tolerance")
      ->capture_default_str();
  rec_cmd->add_option("--c-min", rec.options.c_min)->capture_default_str();
  rec_cmd->add_option("--threads", rec.options.threads, "worker threads, 0 = all cores")
      ->capture_default_str();
  rec_cmd->add_option("--accept-threshold", rec.accept_threshold,
                      "exit 3 unless the objective is below this");
  rec_cmd->add_option("--out", rec.out, "output path (stdout if omitted)");

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "Readable summary of a reconstruction result");
  report_cmd->add_option("--result", report.result, "result JSON")->required();
  report_cmd->add_option("--out", report.out, "output path (stdout if omitted)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*ideal_cmd) {
      cmd_ideal(ideal, sink);
    } else if (*vis_cmd) {
      cmd_visibility(vis, sink);
    } else if (*dist_cmd) {
      cmd_distribution(dist, sink);
    } else if (*dip_cmd) {
      const bool synthesis = std::any_of(synthesis_flags.begin(), synthesis_flags.end(),
                                         [](const CLI::Option* o) { return o->count() > 0; });
      cmd_dip(dip, sink, synthesis);
    } else if (*rec_cmd) {
      return cmd_reconstruct(rec, sink);
    } else if (*report_cmd) {
      cmd_report(report, sink);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalExit&) {
    return kNumerical;
  } catch (const FitFailure& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const DegenerateDataError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const GaugeAnchorError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  } catch (const io::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
  return kSuccess;
}

}  // namespace mmiq::cli
