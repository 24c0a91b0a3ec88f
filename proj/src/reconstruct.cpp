#include "mmiq/reconstruct.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <thread>

#include "mmiq/descent.hpp"
#include "mmiq/errors.hpp"

namespace mmiq {

namespace {

constexpr double kAlternativeObjective = 1e-6;
constexpr double kAlternativeGaugeTol = 1e-3;
constexpr double kUncertaintyFloor = 1e-3;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

// Measured cell flattened to 0-based mode indices.
struct Cell {
  int row, col;
  int i, j, k, l;
  double measured;
};

std::vector<Cell> defined_cells(const VisibilityMatrix& v) {
  std::vector<Cell> cells;
  for (int r = 0; r < v.rows(); ++r)
    for (int c = 0; c < v.cols(); ++c) {
      if (!v.defined(r, c)) continue;
      const auto& in = v.input_pairs()[r];
      const auto& out = v.output_pairs()[c];
      cells.push_back({r, c, in.first - 1, in.second - 1, out.first - 1, out.second - 1,
                       v.value(r, c)});
    }
  return cells;
}

void check_dimensions(const VisibilityMatrix& v, int n_inputs, int n_outputs) {
  const auto in = lexicographic_pairs(n_inputs);
  const auto out = lexicographic_pairs(n_outputs);
  if (v.input_pairs() != in || v.output_pairs() != out)
    throw ShapeError("visibility matrix is " + std::to_string(v.rows()) + "x" +
                     std::to_string(v.cols()) + " but a " + std::to_string(n_inputs) + "x" +
                     std::to_string(n_outputs) + " device needs " + std::to_string(in.size()) +
                     "x" + std::to_string(out.size()) + " lexicographic pairs");
}

// Fills `r` with V - V_m on included cells, zero elsewhere; returns the
// number of included cells.
int visibility_residuals(const Eigen::MatrixXcd& m, const std::vector<Cell>& cells, double c_min,
                         Eigen::Ref<Eigen::VectorXd> r) {
  int included = 0;
  for (std::size_t n = 0; n < cells.size(); ++n) {
    const auto& cell = cells[n];
    const auto co = detail::coincidence(m, cell.i, cell.j, cell.k, cell.l);
    if (co.classical > c_min) {
      r(n) = (co.classical - co.quantum) / co.classical - cell.measured;
      ++included;
    } else {
      r(n) = 0.0;
    }
  }
  return included;
}

Eigen::MatrixXcd build_entries(const Eigen::MatrixXd& mags, std::span<const double> phases) {
  const Eigen::Index rows = mags.rows();
  const Eigen::Index cols = mags.cols();
  Eigen::MatrixXcd m(rows, cols);
  std::size_t p = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) {
      const double a = std::abs(mags(i, k));
      m(i, k) = (i == 0 || k == 0) ? Complex(a, 0.0) : std::polar(a, phases[p++]);
    }
  return m;
}

struct Problem {
  std::vector<Cell> cells;
  Eigen::MatrixXd magnitudes;
  Eigen::MatrixXd uncertainty;
  ReconstructionOptions options;
  int n_phases = 0;

  bool joint() const { return options.mode == ReconstructionMode::joint_refinement; }

  Eigen::MatrixXd magnitudes_from(const Eigen::VectorXd& p) const {
    if (!joint()) return magnitudes;
    Eigen::MatrixXd mags(magnitudes.rows(), magnitudes.cols());
    for (Eigen::Index i = 0; i < mags.rows(); ++i)
      for (Eigen::Index k = 0; k < mags.cols(); ++k)
        mags(i, k) = p(n_phases + i * mags.cols() + k);
    return mags;
  }

  Eigen::MatrixXcd entries_from(const Eigen::VectorXd& p) const {
    return build_entries(magnitudes_from(p),
                         std::span<const double>(p.data(), static_cast<std::size_t>(n_phases)));
  }

  Eigen::VectorXd residuals(const Eigen::VectorXd& p) const {
    const auto n_cells = static_cast<Eigen::Index>(cells.size());
    const Eigen::Index n_mags = joint() ? magnitudes.size() : 0;
    Eigen::VectorXd r(n_cells + n_mags);
    const Eigen::MatrixXcd m = entries_from(p);
    const int included = visibility_residuals(m, cells, options.c_min, r.head(n_cells));
    if (included == 0) return Eigen::VectorXd::Constant(r.size(), kNaN);
    r.head(n_cells) /= std::sqrt(static_cast<double>(included));
    if (joint()) {
      const double w = std::sqrt(options.magnitude_penalty_weight);
      const Eigen::Index cols = magnitudes.cols();
      for (Eigen::Index i = 0; i < magnitudes.rows(); ++i)
        for (Eigen::Index k = 0; k < cols; ++k)
          r(n_cells + i * cols + k) = w * (std::abs(p(n_phases + i * cols + k)) -
                                           magnitudes(i, k)) / uncertainty(i, k);
    }
    return r;
  }
};

struct StartOutcome {
  StartDiagnostics diagnostics;
  Eigen::VectorXd parameters;
};

StartOutcome run_start(const Problem& problem, int index, const Eigen::VectorXd& start) {
  DescentOptions descent;
  descent.max_iterations = problem.options.max_iterations;
  descent.convergence_tol = problem.options.convergence_tol;
  descent.gradient_step = problem.options.gradient_step;
  const ResidualFunction f = [&problem](const Eigen::VectorXd& p) { return problem.residuals(p); };
  auto d = minimize_least_squares(f, start, descent);

  StartOutcome out;
  out.diagnostics.index = index;
  out.diagnostics.failed = d.failed;
  out.diagnostics.iterations = d.iterations;
  out.diagnostics.history = std::move(d.history);
  out.parameters = std::move(d.parameters);
  if (d.failed) {
    out.diagnostics.objective = kNaN;
  } else {
    const auto n_cells = static_cast<Eigen::Index>(problem.cells.size());
    out.diagnostics.objective = std::sqrt(d.residuals.head(n_cells).squaredNorm());
  }
  return out;
}

}  // namespace

void MagnitudeGrid::validate() const {
  if (values.size() == 0) throw ShapeError("magnitude grid is empty");
  if (!values.allFinite() || (values.array() < 0.0).any())
    throw ValidationError("magnitudes must be finite and non-negative");
  if (uncertainty) {
    if (uncertainty->rows() != values.rows() || uncertainty->cols() != values.cols())
      throw ShapeError("uncertainty grid must match the magnitude grid");
    if (!uncertainty->allFinite() || (uncertainty->array() <= 0.0).any())
      throw ValidationError("uncertainties must be finite and positive");
  }
}

MagnitudeGrid magnitudes_of(const TransitionMatrix& m) { return {m.magnitudes(), std::nullopt}; }

void ReconstructionOptions::validate() const {
  if (starts < 1) throw ValidationError("reconstruction needs at least one start");
  if (max_iterations < 1) throw ValidationError("max_iterations must be positive");
  if (!(convergence_tol > 0.0) || !(gradient_step > 0.0) || !(c_min > 0.0))
    throw ValidationError("tolerances must be positive");
  if (!(magnitude_penalty_weight >= 0.0) || !(default_relative_uncertainty > 0.0))
    throw ValidationError("penalty weight and default uncertainty must be non-negative");
  if (threads < 0) throw ValidationError("thread count must be non-negative");
}

ObjectiveValue objective(const TransitionMatrix& candidate, const VisibilityMatrix& measured,
                         double c_min) {
  check_dimensions(measured, candidate.n_inputs(), candidate.n_outputs());
  const auto cells = defined_cells(measured);
  Eigen::VectorXd r(cells.size());
  const int included = visibility_residuals(candidate.entries(), cells, c_min, r);
  const int total = measured.rows() * measured.cols();
  if (included == 0)
    throw DegenerateDataError("no visibility cell is defined in both measurement and model");
  return {std::sqrt(r.squaredNorm() / included), included, total - included};
}

TransitionMatrix parameterize(const MagnitudeGrid& magnitudes, std::span<const double> phases) {
  magnitudes.validate();
  const auto expected =
      static_cast<std::size_t>((magnitudes.values.rows() - 1) * (magnitudes.values.cols() - 1));
  if (phases.size() != expected)
    throw ShapeError("expected " + std::to_string(expected) + " interior phases, got " +
                     std::to_string(phases.size()));
  return TransitionMatrix(build_entries(magnitudes.values, phases));
}

ReconstructionResult reconstruct(const VisibilityMatrix& measured, const MagnitudeGrid& magnitudes,
                                 const ReconstructionOptions& options) {
  options.validate();
  magnitudes.validate();
  const auto n_in = static_cast<int>(magnitudes.values.rows());
  const auto n_out = static_cast<int>(magnitudes.values.cols());
  check_dimensions(measured, n_in, n_out);

  Problem problem;
  problem.cells = defined_cells(measured);
  if (problem.cells.empty())
    throw DegenerateDataError("measured visibility matrix has no defined cell");
  problem.magnitudes = magnitudes.values;
  problem.options = options;
  problem.n_phases = (n_in - 1) * (n_out - 1);
  if (magnitudes.uncertainty) {
    problem.uncertainty = *magnitudes.uncertainty;
  } else {
    problem.uncertainty = (magnitudes.values * options.default_relative_uncertainty)
                              .cwiseMax(kUncertaintyFloor);
  }
  const int n_params =
      problem.n_phases + (problem.joint() ? static_cast<int>(magnitudes.values.size()) : 0);

  // Start points are drawn up front so the worker count cannot change them.
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Eigen::VectorXd> start_points;
  for (int s = 0; s < options.starts; ++s) {
    Eigen::VectorXd p(n_params);
    for (int k = 0; k < problem.n_phases; ++k)
      p(k) = s == 0 ? 0.0 : std::numbers::pi - 2.0 * std::numbers::pi * unit(rng);
    if (problem.joint())
      for (Eigen::Index i = 0; i < magnitudes.values.rows(); ++i)
        for (Eigen::Index k = 0; k < n_out; ++k)
          p(problem.n_phases + i * n_out + k) = magnitudes.values(i, k);
    start_points.push_back(std::move(p));
  }

  std::vector<StartOutcome> outcomes(options.starts);
  const int workers =
      std::min(options.starts, options.threads == 0
                                   ? std::max(1, static_cast<int>(std::thread::hardware_concurrency()))
                                   : options.threads);
  if (workers <= 1) {
    for (int s = 0; s < options.starts; ++s) outcomes[s] = run_start(problem, s + 1, start_points[s]);
  } else {
    std::atomic<int> next{0};
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int s = next++; s < options.starts; s = next++)
          outcomes[s] = run_start(problem, s + 1, start_points[s]);
      });
  }

  int best = -1;
  for (int s = 0; s < options.starts; ++s) {
    const auto& d = outcomes[s].diagnostics;
    if (d.failed) continue;
    if (best < 0 || d.objective < outcomes[best].diagnostics.objective) best = s;
  }
  if (best < 0) throw DegenerateDataError("every reconstruction start was abandoned");

  auto to_matrix = [&](const Eigen::VectorXd& p) {
    return TransitionMatrix(problem.entries_from(p));
  };
  auto canonical = [](const TransitionMatrix& m) -> GaugeClass {
    try {
      return canonical_gauge(m);
    } catch (const GaugeAnchorError&) {
      return GaugeClass{m, false};
    }
  };

  const GaugeClass gauge = canonical(to_matrix(outcomes[best].parameters));
  ReconstructionResult result(gauge.representative);
  result.conjugated = gauge.conjugated;
  result.options = options;
  result.best_start = best + 1;
  result.iterations_used = outcomes[best].diagnostics.iterations;
  result.underdetermined = static_cast<int>(problem.cells.size()) < n_params;
  for (auto& o : outcomes) result.starts.push_back(o.diagnostics);

  result.residuals = Eigen::MatrixXd::Constant(measured.rows(), measured.cols(), kNaN);
  double sum_sq = 0.0;
  int included = 0;
  for (int r = 0; r < measured.rows(); ++r)
    for (int c = 0; c < measured.cols(); ++c) {
      const auto vr = visibility(result.matrix, measured.input_pairs()[r],
                                 measured.output_pairs()[c], options.c_min);
      const auto vm = measured.at(r, c);
      if (vr && vm) {
        const double d = *vr - *vm;
        result.residuals(r, c) = d;
        sum_sq += d * d;
        ++included;
      } else {
        result.excluded_cells.push_back({measured.input_pairs()[r], measured.output_pairs()[c]});
      }
    }
  if (included == 0) throw DegenerateDataError("reconstructed matrix leaves no usable cell");
  result.objective = std::sqrt(sum_sq / included);

  for (int s = 0; s < options.starts; ++s) {
    const auto& d = outcomes[s].diagnostics;
    if (s == best || d.failed || !(d.objective < kAlternativeObjective)) continue;
    const TransitionMatrix candidate = canonical(to_matrix(outcomes[s].parameters)).representative;
    auto same = [&](const TransitionMatrix& other) {
      try {
        return gauge_equivalent(candidate, other, kAlternativeGaugeTol);
      } catch (const GaugeAnchorError&) {
        return false;
      }
    };
    if (same(result.matrix)) continue;
    if (std::any_of(result.alternative_solutions.begin(), result.alternative_solutions.end(), same))
      continue;
    result.alternative_solutions.push_back(candidate);
  }
  return result;
}

std::vector<ResidualRow> residual_report(const ReconstructionResult& result,
                                         const VisibilityMatrix& measured) {
  check_dimensions(measured, result.matrix.n_inputs(), result.matrix.n_outputs());
  std::vector<ResidualRow> rows;
  for (int r = 0; r < measured.rows(); ++r)
    for (int c = 0; c < measured.cols(); ++c) {
      ResidualRow row;
      row.input = measured.input_pairs()[r];
      row.output = measured.output_pairs()[c];
      row.measured = measured.at(r, c);
      row.reconstructed = visibility(result.matrix, row.input, row.output, result.options.c_min);
      row.included = row.measured.has_value() && row.reconstructed.has_value();
      row.residual = row.included ? *row.reconstructed - *row.measured : kNaN;
      rows.push_back(row);
    }
  std::stable_sort(rows.begin(), rows.end(), [](const ResidualRow& a, const ResidualRow& b) {
    if (a.included != b.included) return a.included;
    return a.included && std::abs(a.residual) > std::abs(b.residual);
  });
  return rows;
}

}  // namespace mmiq
