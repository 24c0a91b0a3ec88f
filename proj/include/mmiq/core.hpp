#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace mmiq {

using Complex = std::complex<double>;

/// Complex amplitude grid of a linear-optical device.
///
/// Rows are input modes and columns are output modes. Public accessors take
/// 1-based mode labels, matching waveguide numbering; the underlying Eigen
/// storage is 0-based. No sub-unitarity is enforced: a reduced matrix of a
/// lossy device may have column norms above one. When constructed with
/// `strict_unitary`, rows and columns must be orthonormal to 1e-10.
class TransitionMatrix {
 public:
  static constexpr double kUnitaryTolerance = 1e-10;

  explicit TransitionMatrix(Eigen::MatrixXcd entries, bool strict_unitary = false);

  int n_inputs() const { return static_cast<int>(entries_.rows()); }
  int n_outputs() const { return static_cast<int>(entries_.cols()); }

  /// Entry for 1-based (input, output) labels. Throws IndexError.
  Complex at(int input, int output) const;
  const Eigen::MatrixXcd& entries() const { return entries_; }
  bool strict_unitary() const { return strict_unitary_; }

  Eigen::MatrixXd magnitudes() const { return entries_.cwiseAbs(); }
  TransitionMatrix conjugate() const;

 private:
  Eigen::MatrixXcd entries_;
  bool strict_unitary_;
};

/// Builds a matrix from a row-major grid; throws ShapeError on ragged rows and
/// ValidationError on non-finite entries.
TransitionMatrix make_transition_matrix(const std::vector<std::vector<Complex>>& rows);

/// Largest entry of |U U^† - I| and |U^† U - I|; infinity for non-square input.
double unitarity_defect(const Eigen::MatrixXcd& m);
bool is_unitary(const TransitionMatrix& m, double tol);

/// Balanced directional-coupler matrix (1/sqrt 2)[[1, i], [i, 1]].
TransitionMatrix ideal_2x2();

/// Symmetric 4x4 MMI splitter with free internal phase `theta`.
TransitionMatrix ideal_4x4(double theta);

struct GaugeClass {
  TransitionMatrix representative;
  bool conjugated = false;
};

/// Moves every first-row and first-column entry onto the non-negative real
/// axis with diagonal phase matrices, then conjugates if the largest
/// interior entry with a non-real phase sits below the real axis. Ties in
/// magnitude (within 1e-12) resolve to the first entry in row-major order.
GaugeClass canonical_gauge(const TransitionMatrix& m);

/// True when the two matrices differ only by input/output phases and, at
/// most, elementwise conjugation.
bool gauge_equivalent(const TransitionMatrix& a, const TransitionMatrix& b, double tol);

/// Haar-like random unitary from QR of an i.i.d. complex Gaussian grid.
TransitionMatrix random_unitary(int n, std::uint64_t seed);

/// Phase wrapped into (-pi, pi].
double wrap_phase(double phi);

}  // namespace mmiq
