#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mmiq/core.hpp"
#include "mmiq/interference.hpp"

namespace mmiq {

/// Measured |M_ik| with optional per-entry uncertainty.
struct MagnitudeGrid {
  Eigen::MatrixXd values;
  std::optional<Eigen::MatrixXd> uncertainty;

  void validate() const;
};

MagnitudeGrid magnitudes_of(const TransitionMatrix& m);

enum class ReconstructionMode { fixed_magnitudes, joint_refinement };

struct ReconstructionOptions {
  ReconstructionMode mode = ReconstructionMode::fixed_magnitudes;
  /// Weight of the magnitude penalty in joint refinement.
  double magnitude_penalty_weight = 1.0;
  /// Default magnitude uncertainty as a fraction of each magnitude.
  double default_relative_uncertainty = 0.05;
  int starts = 20;
  std::uint64_t seed = 1;
  int max_iterations = 10000;
  double convergence_tol = 1e-12;
  double gradient_step = 1e-6;
  double c_min = kDefaultCMin;
  /// Worker threads for the starts; 0 picks the hardware concurrency.
  int threads = 1;

  void validate() const;
};

struct ObjectiveValue {
  double rms = 0.0;
  int included_cells = 0;
  int excluded_cells = 0;
};

/// RMS of V^candidate - V^measured over cells defined in the measurement and
/// with candidate C > c_min. Throws DegenerateDataError if no cell remains.
ObjectiveValue objective(const TransitionMatrix& candidate, const VisibilityMatrix& measured,
                         double c_min = kDefaultCMin);

/// |M_ik| e^{i phi_ik} with phi = 0 on the first row and column; `phases`
/// holds the (N-1)(M-1) interior phases row-major.
TransitionMatrix parameterize(const MagnitudeGrid& magnitudes, std::span<const double> phases);

struct CellRef {
  ModePair input;
  ModePair output;
};

struct StartDiagnostics {
  int index = 0;  // 1-based
  /// NaN when the start was abandoned.
  double objective = 0.0;
  bool failed = false;
  int iterations = 0;
  /// Descent cost (sqrt of the summed squared residuals) per accepted step.
  std::vector<double> history;
};

struct ReconstructionResult {
  explicit ReconstructionResult(TransitionMatrix m) : matrix(std::move(m)) {}

  TransitionMatrix matrix;  // canonical gauge
  bool conjugated = false;
  double objective = 0.0;
  /// V^r - V^m; NaN on excluded cells.
  Eigen::MatrixXd residuals;
  std::vector<CellRef> excluded_cells;
  std::vector<StartDiagnostics> starts;
  int best_start = 0;
  int iterations_used = 0;
  /// Fewer usable cells than free parameters.
  bool underdetermined = false;
  /// Zero-objective solutions from other starts that are not gauge
  /// equivalent to `matrix`.
  std::vector<TransitionMatrix> alternative_solutions;
  ReconstructionOptions options;
};

/// Multi-start least-squares search for a matrix whose visibilities match
/// `measured` given the magnitudes. Start 1 uses zero interior phases;
/// later starts draw phases uniformly in (-pi, pi] from `options.seed`.
/// The best start wins, ties going to the lowest index, so the result does
/// not depend on the thread count.
ReconstructionResult reconstruct(const VisibilityMatrix& measured, const MagnitudeGrid& magnitudes,
                                 const ReconstructionOptions& options);

struct ResidualRow {
  ModePair input;
  ModePair output;
  std::optional<double> measured;
  std::optional<double> reconstructed;
  /// NaN unless both sides are defined.
  double residual = 0.0;
  bool included = false;
};

/// Per-cell comparison sorted by |residual| descending; rows without a
/// residual come last in grid order.
std::vector<ResidualRow> residual_report(const ReconstructionResult& result,
                                         const VisibilityMatrix& measured);

}  // namespace mmiq
