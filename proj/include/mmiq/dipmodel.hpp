#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mmiq/core.hpp"
#include "mmiq/interference.hpp"

namespace mmiq {

inline constexpr double kSpeedOfLight = 2.99792458e8;  // m/s

/// Gaussian filter model of the two photons. Lengths in micrometres;
/// bandwidths are intensity FWHM.
struct SpectralSetup {
  double center_wavelength_um = 0.804;
  double bandwidth_a_um = 0.002;
  double bandwidth_b_um = 0.002;

  void validate() const;
};

/// Angular-frequency standard deviations (rad/s) of the two photon spectra.
struct CoherenceSigma {
  double first = 0.0;
  double second = 0.0;
};

CoherenceSigma coherence_sigma(const SpectralSetup& setup);

/// sigma_c with sigma_c^2 = 2 s1^2 s2^2 / (s1^2 + s2^2), in rad/s.
double combined_sigma(const SpectralSetup& setup);

/// FWHM of the interference envelope as free-space path length (um).
double dip_envelope_fwhm(const SpectralSetup& setup);

/// Source visibility reduced by a Gaussian relative-delay jitter (seconds)
/// acting on the interference term. Narrower filters restore visibility.
double jitter_visibility(double v_source, double jitter_sigma_s, const SpectralSetup& setup);

/// Jitter that brings `v_source` down to `v_target` for `setup`.
/// Requires 0 < v_target <= v_source <= 1.
double calibrate_jitter(double v_source, double v_target, const SpectralSetup& setup);

struct DipSample {
  double delay_um = 0.0;
  double coincidences = 0.0;
  std::optional<double> accidentals;
};

struct DipTrace {
  std::vector<DipSample> samples;
  std::optional<ModePair> inputs;
  std::optional<ModePair> outputs;

  /// Delays strictly increasing, counts finite and non-negative.
  void validate() const;
  bool has_accidentals() const;
};

struct TraceSynthesis {
  ModePair inputs{1, 2};
  ModePair outputs{1, 2};
  SpectralSetup setup;
  double jitter_sigma_s = 0.0;
  /// Source-limited visibility multiplying the jitter-reduced one.
  double source_visibility = 1.0;
  /// Counts per unit coincidence probability.
  double scale = 1000.0;
  /// Counts per micrometre of delay.
  double slope = 0.0;
  /// Expected accidental counts per sample; zero omits the column.
  double accidental_rate = 0.0;
  std::vector<double> delays_um;
  /// Poisson counts when set, expectations otherwise.
  std::optional<std::uint64_t> noise_seed;
};

/// Expected counts scale*[C + g(x)(Q - C)] + slope*x + accidentals, with
/// g(x) = V_eff exp(-x^2 sigma_c^2 / c^2).
DipTrace synthesize_trace(const TransitionMatrix& m, const TraceSynthesis& synth);

/// Coincidences minus accidentals, floored at zero.
DipTrace correct_accidentals(const DipTrace& trace);

struct DipFit {
  double visibility = 0.0;
  double visibility_stderr = 0.0;
  double fwhm_um = 0.0;
  double baseline = 0.0;
  double slope = 0.0;
  double center_um = 0.0;
  double residual_rms = 0.0;
  double chi2 = 0.0;
  int iterations = 0;
};

enum class DipShape { gaussian };

inline constexpr int kMinFitSamples = 8;

/// Poisson-weighted fit of baseline*(1 - V exp(-(x-x0)^2 / 2w^2)) + slope*x.
/// Starts from count weights, then reweights by the fitted rate.
/// Throws FitFailure when the descent does not settle.
DipFit fit_dip(const DipTrace& trace, DipShape shape = DipShape::gaussian);

/// Model value of a fit at `delay_um`.
double evaluate_dip(const DipFit& fit, double delay_um);

}  // namespace mmiq
