#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace mmiq {

/// Residual vector r(p); the descent minimises |r|^2.
using ResidualFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct DescentOptions {
  int max_iterations = 10000;
  /// Stop once an accepted step lowers sqrt(|r|^2) by less than this.
  double convergence_tol = 1e-12;
  /// Central-difference step for the Jacobian.
  double gradient_step = 1e-6;
  /// Scale the difference step by max(1, |p_j|) for parameters with
  /// large natural units.
  bool relative_step = false;
};

struct DescentResult {
  Eigen::VectorXd parameters;
  Eigen::VectorXd residuals;
  /// Jacobian at the returned parameters.
  Eigen::MatrixXd jacobian;
  double cost = 0.0;  // |r|^2
  int iterations = 0;
  /// sqrt(cost) after the start point and after every accepted step.
  std::vector<double> history;
  bool converged = false;
  /// A non-finite residual was met; the descent was abandoned.
  bool failed = false;
};

Eigen::MatrixXd numeric_jacobian(const ResidualFunction& f, const Eigen::VectorXd& p,
                                 const Eigen::VectorXd& r0, const DescentOptions& options);

/// Levenberg-style damped Gauss-Newton descent with numerically estimated
/// derivatives. A rejected trial step raises the damping, which shortens
/// and rotates the step toward the gradient, until the cost decreases; the
/// accepted cost sequence is therefore non-increasing.
DescentResult minimize_least_squares(const ResidualFunction& f, Eigen::VectorXd start,
                                     const DescentOptions& options);

}  // namespace mmiq
