#include "mmiq/descent.hpp"

#include <algorithm>
#include <cmath>

namespace mmiq {

namespace {

constexpr double kInitialDamping = 1e-3;
constexpr double kMinDamping = 1e-15;
constexpr double kMaxDamping = 1e16;

bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

Eigen::MatrixXd numeric_jacobian(const ResidualFunction& f, const Eigen::VectorXd& p,
                                 const Eigen::VectorXd& r0, const DescentOptions& options) {
  Eigen::MatrixXd j(r0.size(), p.size());
  Eigen::VectorXd probe = p;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    const double h =
        options.relative_step ? options.gradient_step * std::max(1.0, std::abs(p(k)))
                              : options.gradient_step;
    probe(k) = p(k) + h;
    const Eigen::VectorXd plus = f(probe);
    probe(k) = p(k) - h;
    const Eigen::VectorXd minus = f(probe);
    probe(k) = p(k);
    j.col(k) = (plus - minus) / (2.0 * h);
  }
  return j;
}

DescentResult minimize_least_squares(const ResidualFunction& f, Eigen::VectorXd start,
                                     const DescentOptions& options) {
  DescentResult out;
  out.parameters = std::move(start);
  out.residuals = f(out.parameters);
  if (!finite(out.residuals)) {
    out.failed = true;
    out.cost = std::numeric_limits<double>::quiet_NaN();
    out.history.push_back(out.cost);
    return out;
  }
  out.cost = out.residuals.squaredNorm();
  out.history.push_back(std::sqrt(out.cost));

  double damping = kInitialDamping;
  const Eigen::Index n = out.parameters.size();
  while (out.iterations < options.max_iterations) {
    if (out.cost == 0.0) {
      out.converged = true;
      break;
    }
    const Eigen::MatrixXd j = numeric_jacobian(f, out.parameters, out.residuals, options);
    const Eigen::MatrixXd normal = j.transpose() * j;
    const Eigen::VectorXd gradient = j.transpose() * out.residuals;
    if (!gradient.allFinite()) {
      out.failed = true;
      break;
    }
    if (gradient.cwiseAbs().maxCoeff() == 0.0) {
      out.converged = true;
      break;
    }

    bool accepted = false;
    Eigen::VectorXd trial_params;
    Eigen::VectorXd trial_residuals;
    double trial_cost = 0.0;
    while (damping <= kMaxDamping) {
      Eigen::MatrixXd damped = normal;
      for (Eigen::Index k = 0; k < n; ++k)
        damped(k, k) += damping * std::max(normal(k, k), 1e-12);
      const Eigen::VectorXd step = damped.ldlt().solve(-gradient);
      trial_params = out.parameters + step;
      trial_residuals = f(trial_params);
      if (!finite(trial_residuals)) {
        out.failed = true;
        return out;
      }
      trial_cost = trial_residuals.squaredNorm();
      if (trial_cost < out.cost) {
        accepted = true;
        damping = std::max(damping / 3.0, kMinDamping);
        break;
      }
      damping *= 4.0;
    }
    ++out.iterations;
    if (!accepted) {
      // No descent direction left at working precision.
      out.converged = true;
      break;
    }
    const double improvement = std::sqrt(out.cost) - std::sqrt(trial_cost);
    out.parameters = std::move(trial_params);
    out.residuals = std::move(trial_residuals);
    out.cost = trial_cost;
    out.history.push_back(std::sqrt(out.cost));
    if (improvement < options.convergence_tol) {
      out.converged = true;
      break;
    }
  }
  out.jacobian = numeric_jacobian(f, out.parameters, out.residuals, options);
  return out;
}

}  // namespace mmiq
