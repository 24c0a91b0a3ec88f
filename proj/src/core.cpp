#include "mmiq/core.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "mmiq/errors.hpp"

namespace mmiq {

namespace {

constexpr double kAnchorFloor = 1e-12;
constexpr double kTieTolerance = 1e-12;
constexpr double kRealAxisTolerance = 1e-9;

bool all_finite(const Eigen::MatrixXcd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (!std::isfinite(m(i, j).real()) || !std::isfinite(m(i, j).imag())) return false;
  return true;
}

Complex unit_phase(Complex z) { return z / std::abs(z); }

}  // namespace

double wrap_phase(double phi) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::remainder(phi, two_pi);
  if (w <= -std::numbers::pi) w += two_pi;
  return w;
}

TransitionMatrix::TransitionMatrix(Eigen::MatrixXcd entries, bool strict_unitary)
    : entries_(std::move(entries)), strict_unitary_(strict_unitary) {
  if (entries_.rows() < 1 || entries_.cols() < 1)
    throw ShapeError("transition matrix needs at least one input and one output");
  if (!all_finite(entries_)) throw ValidationError("transition matrix has a non-finite entry");
  if (strict_unitary_ && unitarity_defect(entries_) > kUnitaryTolerance)
    throw ValidationError("matrix flagged strict-unitary is not unitary within 1e-10");
}

Complex TransitionMatrix::at(int input, int output) const {
  if (input < 1 || input > n_inputs() || output < 1 || output > n_outputs())
    throw IndexError("mode label (" + std::to_string(input) + ", " + std::to_string(output) +
                     ") outside " + std::to_string(n_inputs()) + "x" +
                     std::to_string(n_outputs()) + " matrix");
  return entries_(input - 1, output - 1);
}

TransitionMatrix TransitionMatrix::conjugate() const {
  return TransitionMatrix(entries_.conjugate(), strict_unitary_);
}

TransitionMatrix make_transition_matrix(const std::vector<std::vector<Complex>>& rows) {
  if (rows.empty() || rows.front().empty()) throw ShapeError("empty grid");
  const auto n_cols = rows.front().size();
  Eigen::MatrixXcd m(rows.size(), n_cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != n_cols)
      throw ShapeError("ragged grid: row " + std::to_string(i + 1) + " has " +
                       std::to_string(rows[i].size()) + " entries, expected " +
                       std::to_string(n_cols));
    for (std::size_t j = 0; j < n_cols; ++j) m(i, j) = rows[i][j];
  }
  return TransitionMatrix(std::move(m));
}

double unitarity_defect(const Eigen::MatrixXcd& m) {
  if (m.rows() != m.cols()) return std::numeric_limits<double>::infinity();
  const auto id = Eigen::MatrixXcd::Identity(m.rows(), m.cols());
  const double a = (m * m.adjoint() - id).cwiseAbs().maxCoeff();
  const double b = (m.adjoint() * m - id).cwiseAbs().maxCoeff();
  return std::max(a, b);
}

bool is_unitary(const TransitionMatrix& m, double tol) {
  return unitarity_defect(m.entries()) <= tol;
}

TransitionMatrix ideal_2x2() {
  const double h = 1.0 / std::numbers::sqrt2;
  Eigen::MatrixXcd m(2, 2);
  m << Complex(h, 0), Complex(0, h),
       Complex(0, h), Complex(h, 0);
  return TransitionMatrix(std::move(m), true);
}

TransitionMatrix ideal_4x4(double theta) {
  if (!std::isfinite(theta)) throw ValidationError("theta must be finite");
  const Complex e = 0.5 * std::polar(1.0, theta);
  const Complex p(0.5, 0.0);
  Eigen::MatrixXcd m(4, 4);
  m << p,  p,  p,  p,
       p,  e, -p, -e,
       p, -p,  p, -p,
       p, -e, -p,  e;
  return TransitionMatrix(std::move(m), true);
}

GaugeClass canonical_gauge(const TransitionMatrix& m) {
  const auto& a = m.entries();
  const Eigen::Index rows = a.rows();
  const Eigen::Index cols = a.cols();
  for (Eigen::Index k = 0; k < cols; ++k)
    if (std::abs(a(0, k)) <= kAnchorFloor)
      throw GaugeAnchorError("gauge anchor (1, " + std::to_string(k + 1) + ") is zero", 1,
                             static_cast<int>(k + 1));
  for (Eigen::Index i = 1; i < rows; ++i)
    if (std::abs(a(i, 0)) <= kAnchorFloor)
      throw GaugeAnchorError("gauge anchor (" + std::to_string(i + 1) + ", 1) is zero",
                             static_cast<int>(i + 1), 1);

  // Column phases clear row 1, then row phases clear column 1.
  Eigen::VectorXcd out_phase(cols);
  for (Eigen::Index k = 0; k < cols; ++k) out_phase(k) = std::conj(unit_phase(a(0, k)));
  Eigen::VectorXcd in_phase(rows);
  for (Eigen::Index i = 0; i < rows; ++i)
    in_phase(i) = std::conj(unit_phase(a(i, 0) * out_phase(0)));

  Eigen::MatrixXcd g(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) {
      if (i == 0 || k == 0)
        g(i, k) = Complex(std::abs(a(i, k)), 0.0);
      else
        g(i, k) = in_phase(i) * a(i, k) * out_phase(k);
    }

  // Conjugation tie-break on the dominant non-real interior entry.
  double best_mag = -1.0;
  double best_phase = 0.0;
  for (Eigen::Index i = 1; i < rows; ++i)
    for (Eigen::Index k = 1; k < cols; ++k) {
      const double mag = std::abs(g(i, k));
      const double phase = std::arg(g(i, k));
      if (std::abs(std::sin(phase)) <= kRealAxisTolerance) continue;
      if (mag > best_mag + kTieTolerance) {
        best_mag = mag;
        best_phase = phase;
      }
    }
  const bool conjugated = best_mag > 0.0 && best_phase < 0.0;
  if (conjugated) g = g.conjugate().eval();
  // Signed zeros would put real negative entries at phase -pi.
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k)
      if (g(i, k).imag() == 0.0) g(i, k) = Complex(g(i, k).real(), 0.0);
  return GaugeClass{TransitionMatrix(std::move(g)), conjugated};
}

namespace {

bool entrywise_close(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b, double tol) {
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
      const double ma = std::abs(a(i, k));
      const double mb = std::abs(b(i, k));
      if (std::abs(ma - mb) > tol) return false;
      if (ma > tol && mb > tol &&
          std::abs(wrap_phase(std::arg(a(i, k)) - std::arg(b(i, k)))) > tol)
        return false;
    }
  return true;
}

}  // namespace

bool gauge_equivalent(const TransitionMatrix& a, const TransitionMatrix& b, double tol) {
  if (a.n_inputs() != b.n_inputs() || a.n_outputs() != b.n_outputs())
    throw ShapeError("gauge comparison needs equal dimensions");
  const auto ca = canonical_gauge(a).representative.entries();
  const auto cb = canonical_gauge(b).representative.entries();
  // The conjugation tie-break can flip on near-degenerate magnitudes, so
  // both orientations of the second representative are tried.
  return entrywise_close(ca, cb, tol) || entrywise_close(ca, cb.conjugate(), tol);
}

TransitionMatrix random_unitary(int n, std::uint64_t seed) {
  if (n < 1) throw ValidationError("random_unitary needs n >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXcd z(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double re = normal(rng);
      const double im = normal(rng);
      z(i, j) = Complex(re, im);
    }
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(z);
  Eigen::MatrixXcd q = qr.householderQ();
  const Eigen::MatrixXcd& r = qr.matrixQR();
  for (int j = 0; j < n; ++j) {
    const Complex d = r(j, j);
    q.col(j) *= std::abs(d) > 0.0 ? d / std::abs(d) : Complex(1.0, 0.0);
  }
  return TransitionMatrix(std::move(q), true);
}

}  // namespace mmiq
