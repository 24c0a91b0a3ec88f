#include "mmiq/dipmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "mmiq/descent.hpp"
#include "mmiq/errors.hpp"

namespace mmiq {

namespace {

constexpr double kMicron = 1e-6;
// FWHM = kFwhmPerSigma * sigma for a Gaussian.
const double kFwhmPerSigma = 2.0 * std::sqrt(2.0 * std::numbers::ln2);

}  // namespace

void SpectralSetup::validate() const {
  if (!(center_wavelength_um > 0.0) || !(bandwidth_a_um > 0.0) || !(bandwidth_b_um > 0.0))
    throw ValidationError("spectral setup values must be positive");
  if (!(bandwidth_a_um < center_wavelength_um) || !(bandwidth_b_um < center_wavelength_um))
    throw ValidationError("filter bandwidth must be below the centre wavelength");
  if (!std::isfinite(center_wavelength_um) || !std::isfinite(bandwidth_a_um) ||
      !std::isfinite(bandwidth_b_um))
    throw ValidationError("spectral setup values must be finite");
}

CoherenceSigma coherence_sigma(const SpectralSetup& setup) {
  setup.validate();
  const double lambda = setup.center_wavelength_um * kMicron;
  auto sigma = [&](double bandwidth_um) {
    const double df = kSpeedOfLight * bandwidth_um * kMicron / (lambda * lambda);
    return 2.0 * std::numbers::pi * df / kFwhmPerSigma;
  };
  return {sigma(setup.bandwidth_a_um), sigma(setup.bandwidth_b_um)};
}

double combined_sigma(const SpectralSetup& setup) {
  const auto s = coherence_sigma(setup);
  const double a2 = s.first * s.first;
  const double b2 = s.second * s.second;
  return std::sqrt(2.0 * a2 * b2 / (a2 + b2));
}

double dip_envelope_fwhm(const SpectralSetup& setup) {
  const double fwhm_s = 2.0 * std::sqrt(std::numbers::ln2) / combined_sigma(setup);
  return fwhm_s * kSpeedOfLight / kMicron;
}

double jitter_visibility(double v_source, double jitter_sigma_s, const SpectralSetup& setup) {
  if (!(v_source >= 0.0 && v_source <= 1.0))
    throw ValidationError("source visibility must lie in [0, 1]");
  if (!(jitter_sigma_s >= 0.0)) throw ValidationError("jitter must be non-negative");
  if (std::isinf(jitter_sigma_s)) return 0.0;
  const double sc = combined_sigma(setup);
  return v_source * std::exp(-0.5 * jitter_sigma_s * jitter_sigma_s * sc * sc);
}

double calibrate_jitter(double v_source, double v_target, const SpectralSetup& setup) {
  if (!(v_target > 0.0 && v_target <= v_source && v_source <= 1.0))
    throw ValidationError("calibration needs 0 < target <= source <= 1");
  return std::sqrt(-2.0 * std::log(v_target / v_source)) / combined_sigma(setup);
}

void DipTrace::validate() const {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!std::isfinite(s.delay_um)) throw ValidationError("non-finite delay");
    if (i > 0 && !(s.delay_um > samples[i - 1].delay_um))
      throw ValidationError("delays must be strictly increasing (sample " +
                            std::to_string(i + 1) + ")");
    if (!(s.coincidences >= 0.0) || !std::isfinite(s.coincidences))
      throw ValidationError("coincidence counts must be finite and non-negative");
    if (s.accidentals && (!(*s.accidentals >= 0.0) || !std::isfinite(*s.accidentals)))
      throw ValidationError("accidental counts must be finite and non-negative");
  }
}

bool DipTrace::has_accidentals() const {
  return !samples.empty() &&
         std::all_of(samples.begin(), samples.end(),
                     [](const DipSample& s) { return s.accidentals.has_value(); });
}

DipTrace synthesize_trace(const TransitionMatrix& m, const TraceSynthesis& synth) {
  for (std::size_t i = 1; i < synth.delays_um.size(); ++i)
    if (!(synth.delays_um[i] > synth.delays_um[i - 1]))
      throw ValidationError("delays must be strictly increasing");
  if (!(synth.scale >= 0.0) || !(synth.accidental_rate >= 0.0))
    throw ValidationError("scale and accidental rate must be non-negative");
  if (!(synth.source_visibility >= 0.0 && synth.source_visibility <= 1.0))
    throw ValidationError("source visibility must lie in [0, 1]");

  const double q = quantum_coincidence(m, synth.inputs, synth.outputs);
  const double c = classical_coincidence(m, synth.inputs, synth.outputs);
  const double v_eff = synth.source_visibility * jitter_visibility(1.0, synth.jitter_sigma_s,
                                                                  synth.setup);
  const double sc = combined_sigma(synth.setup);
  const bool with_accidentals = synth.accidental_rate > 0.0;

  std::optional<std::mt19937_64> rng;
  if (synth.noise_seed) rng.emplace(*synth.noise_seed);
  auto draw = [&](double mean) {
    if (!rng) return mean;
    if (mean <= 0.0) return 0.0;
    std::poisson_distribution<long long> poisson(mean);
    return static_cast<double>(poisson(*rng));
  };

  DipTrace trace;
  trace.inputs = synth.inputs;
  trace.outputs = synth.outputs;
  trace.samples.reserve(synth.delays_um.size());
  for (double x : synth.delays_um) {
    const double tau = x * kMicron / kSpeedOfLight;
    const double overlap = v_eff * std::exp(-tau * tau * sc * sc);
    const double expected =
        std::max(synth.scale * (c + overlap * (q - c)) + synth.slope * x + synth.accidental_rate,
                 0.0);
    DipSample s{x, draw(expected), std::nullopt};
    if (with_accidentals) s.accidentals = draw(synth.accidental_rate);
    trace.samples.push_back(s);
  }
  return trace;
}

DipTrace correct_accidentals(const DipTrace& trace) {
  if (!trace.has_accidentals())
    throw ValidationError("accidental correction needs accidentals on every sample");
  DipTrace out = trace;
  for (auto& s : out.samples) {
    s.coincidences = std::max(s.coincidences - *s.accidentals, 0.0);
    s.accidentals.reset();
  }
  return out;
}

namespace {

enum Param { kBaseline, kVisibility, kCenter, kWidth, kSlope, kParamCount };

double dip_model(const Eigen::VectorXd& p, double x) {
  const double d = x - p(kCenter);
  const double w = p(kWidth);
  return p(kBaseline) * (1.0 - p(kVisibility) * std::exp(-d * d / (2.0 * w * w))) +
         p(kSlope) * x;
}

// Line through the outer quarter of samples on each side.
std::pair<double, double> wing_line(const std::vector<DipSample>& s) {
  const std::size_t n = s.size();
  const std::size_t wing = std::max<std::size_t>(2, n / 4);
  double sx = 0, sy = 0, sxx = 0, sxy = 0, count = 0;
  auto add = [&](const DipSample& d) {
    sx += d.delay_um;
    sy += d.coincidences;
    sxx += d.delay_um * d.delay_um;
    sxy += d.delay_um * d.coincidences;
    count += 1;
  };
  for (std::size_t i = 0; i < wing; ++i) add(s[i]);
  for (std::size_t i = n - wing; i < n; ++i) add(s[i]);
  const double denom = count * sxx - sx * sx;
  const double slope = denom != 0.0 ? (count * sxy - sx * sy) / denom : 0.0;
  return {(sy - slope * sx) / count, slope};
}

Eigen::VectorXd initial_guess(const std::vector<DipSample>& s) {
  const auto [intercept, slope] = wing_line(s);
  std::size_t peak = 0;
  double peak_dev = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double dev = s[i].coincidences - (intercept + slope * s[i].delay_um);
    if (std::abs(dev) > std::abs(peak_dev)) {
      peak_dev = dev;
      peak = i;
    }
  }
  const double span = s.back().delay_um - s.front().delay_um;
  const double spacing = span / static_cast<double>(s.size() - 1);
  double fwhm = spacing;
  if (peak_dev != 0.0) {
    std::size_t lo = peak, hi = peak;
    auto above_half = [&](std::size_t i) {
      const double dev = s[i].coincidences - (intercept + slope * s[i].delay_um);
      return dev / peak_dev > 0.5;
    };
    while (lo > 0 && above_half(lo - 1)) --lo;
    while (hi + 1 < s.size() && above_half(hi + 1)) ++hi;
    fwhm = std::max(s[hi].delay_um - s[lo].delay_um + spacing, spacing);
  }
  Eigen::VectorXd p(kParamCount);
  p(kBaseline) = intercept;
  p(kCenter) = s[peak].delay_um;
  p(kVisibility) = intercept != 0.0 ? -peak_dev / intercept : 0.0;
  p(kWidth) = fwhm / kFwhmPerSigma;
  p(kSlope) = slope;
  return p;
}

}  // namespace

constexpr int kReweightRounds = 20;

DipFit fit_dip(const DipTrace& trace, DipShape shape) {
  (void)shape;  // Gaussian is the only envelope.
  trace.validate();
  const auto& s = trace.samples;
  if (static_cast<int>(s.size()) < kMinFitSamples)
    throw ValidationError("dip fit needs at least " + std::to_string(kMinFitSamples) +
                          " samples, got " + std::to_string(s.size()));

  Eigen::VectorXd inv_sigma(s.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    inv_sigma(i) = 1.0 / std::sqrt(std::max(s[i].coincidences, 1.0));

  const ResidualFunction residuals = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(s.size());
    for (std::size_t i = 0; i < s.size(); ++i)
      r(i) = (dip_model(p, s[i].delay_um) - s[i].coincidences) * inv_sigma(i);
    return r;
  };

  DescentOptions options;
  options.max_iterations = 2000;
  options.convergence_tol = 1e-10;
  options.gradient_step = 1e-7;
  options.relative_step = true;
  auto result = minimize_least_squares(residuals, initial_guess(s), options);

  // Reweight with the fitted rate until the weights settle; the fixed point is
  // the Poisson maximum-likelihood estimate.
  for (int round = 0; round < kReweightRounds && !result.failed && result.converged; ++round) {
    for (std::size_t i = 0; i < s.size(); ++i)
      inv_sigma(i) = 1.0 / std::sqrt(std::max(dip_model(result.parameters, s[i].delay_um), 1.0));
    const Eigen::VectorXd previous = result.parameters;
    result = minimize_least_squares(residuals, previous, options);
    if (result.failed) break;
    const double shift = ((result.parameters - previous).cwiseAbs().array() /
                          (previous.cwiseAbs().array() + 1e-12))
                             .maxCoeff();
    if (shift < 1e-9) break;
  }

  double sq = 0.0;
  if (!result.failed)
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double d = dip_model(result.parameters, s[i].delay_um) - s[i].coincidences;
      sq += d * d;
    }
  const double rms = std::sqrt(sq / static_cast<double>(s.size()));
  if (result.failed || !result.converged || !result.parameters.allFinite())
    throw FitFailure("dip fit did not converge after " + std::to_string(result.iterations) +
                         " iterations",
                     result.failed ? std::numeric_limits<double>::quiet_NaN() : rms);

  const auto& p = result.parameters;
  const Eigen::MatrixXd normal = result.jacobian.transpose() * result.jacobian;
  const Eigen::MatrixXd covariance = normal.completeOrthogonalDecomposition().pseudoInverse();

  DipFit fit;
  fit.visibility = std::clamp(p(kVisibility), -1.0, 1.0);
  fit.visibility_stderr = std::sqrt(std::max(covariance(kVisibility, kVisibility), 0.0));
  fit.fwhm_um = kFwhmPerSigma * std::abs(p(kWidth));
  fit.baseline = p(kBaseline);
  fit.slope = p(kSlope);
  fit.center_um = p(kCenter);
  fit.residual_rms = rms;
  fit.chi2 = result.cost;
  fit.iterations = result.iterations;
  if (!(fit.fwhm_um > 0.0)) throw FitFailure("dip fit collapsed to zero width", rms);
  return fit;
}

double evaluate_dip(const DipFit& fit, double delay_um) {
  const double w = fit.fwhm_um / kFwhmPerSigma;
  const double d = delay_um - fit.center_um;
  return fit.baseline * (1.0 - fit.visibility * std::exp(-d * d / (2.0 * w * w))) +
         fit.slope * delay_um;
}

}  // namespace mmiq
