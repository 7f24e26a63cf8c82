#pragma once

// Box-constrained quasi-Newton minimisation (projected BFGS with an Armijo
// backtracking search along the projection arc).

#include <functional>
#include <string>

#include <Eigen/Dense>

namespace microforge {

/// Returns f(x); writes the gradient when `grad` is non-null. May return a
/// non-finite value to reject a point.
using ObjectiveFn = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct BoxMinimiserOptions {
  int max_iterations = 200;
  /// Convergence on the infinity norm of the projected gradient.
  double gradient_tolerance = 1e-6;
  /// Relative change in f below which progress is considered stalled.
  double function_tolerance = 1e-14;
  int max_backtracks = 40;
  /// Largest first step, as a fraction of the box width.
  double initial_step_fraction = 0.1;
};

struct MinimiseResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double initial_value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string message;

  bool improved() const noexcept { return value < initial_value; }
};

Eigen::VectorXd project_to_box(const Eigen::VectorXd& x, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

MinimiseResult minimise_box(const ObjectiveFn& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                            const Eigen::VectorXd& upper, const BoxMinimiserOptions& options = {});

}  // namespace microforge
