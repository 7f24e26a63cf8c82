#include "microforge/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace microforge {

namespace {

Eigen::VectorXd projected_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const Eigen::VectorXd& lo,
                                   const Eigen::VectorXd& hi) {
  return x - project_to_box(x - g, lo, hi);
}

}  // namespace

Eigen::VectorXd project_to_box(const Eigen::VectorXd& x, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  return x.cwiseMax(lower).cwiseMin(upper);
}

MinimiseResult minimise_box(const ObjectiveFn& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                            const Eigen::VectorXd& upper, const BoxMinimiserOptions& options) {
  const Eigen::Index n = x0.size();
  if (lower.size() != n || upper.size() != n) throw std::invalid_argument("bounds size mismatch");
  if ((lower.array() > upper.array()).any()) throw std::invalid_argument("lower bound exceeds upper bound");

  MinimiseResult res;
  Eigen::VectorXd x = project_to_box(x0, lower, upper);
  Eigen::VectorXd g(n);
  double fx = f(x, &g);
  res.evaluations = 1;
  res.initial_value = fx;
  res.x = x;
  res.value = fx;
  if (!std::isfinite(fx) || !g.allFinite()) {
    res.message = "non-finite objective at the starting point";
    return res;
  }

  const Eigen::VectorXd width = upper - lower;
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;

  for (int it = 0; it < options.max_iterations; ++it) {
    res.iterations = it;
    const Eigen::VectorXd pg = projected_gradient(x, g, lower, upper);
    if (pg.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      res.converged = true;
      res.message = "projected gradient below tolerance";
      break;
    }

    // Variables pinned at a bound with the gradient pushing outward stay fixed.
    Eigen::VectorXd free = Eigen::VectorXd::Ones(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool at_lo = x[i] <= lower[i] && g[i] > 0.0;
      const bool at_hi = x[i] >= upper[i] && g[i] < 0.0;
      if (at_lo || at_hi) free[i] = 0.0;
    }
    Eigen::VectorXd gf = g.cwiseProduct(free);
    Eigen::VectorXd d = -(H * gf).cwiseProduct(free);
    if (d.dot(gf) >= 0.0) {
      H.setIdentity();
      scaled = false;
      d = -gf;
    }
    if (!scaled) {
      // First step after a reset: limit the move to a fraction of the box.
      const double dmax = (d.cwiseAbs().array() / width.array().max(1e-300)).maxCoeff();
      if (dmax > options.initial_step_fraction) d *= options.initial_step_fraction / dmax;
    }

    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd x_new, g_new(n);
    double f_new = fx;
    for (int bt = 0; bt < options.max_backtracks; ++bt) {
      x_new = project_to_box(x + t * d, lower, upper);
      const Eigen::VectorXd step = x_new - x;
      if (step.lpNorm<Eigen::Infinity>() == 0.0) break;
      f_new = f(x_new, &g_new);
      ++res.evaluations;
      if (std::isfinite(f_new) && g_new.allFinite() && f_new <= fx + 1e-4 * g.dot(step)) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      if (scaled) {
        // Retry once from steepest descent before giving up.
        H.setIdentity();
        scaled = false;
        continue;
      }
      res.message = "line search failed";
      break;
    }

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    const double previous = fx;
    x = x_new;
    g = g_new;
    fx = f_new;
    res.x = x;
    res.value = fx;

    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        H = Eigen::MatrixXd::Identity(n, n) * (sy / y.squaredNorm());
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
    }

    if (std::abs(previous - fx) <= options.function_tolerance * std::max(1.0, std::abs(fx))) {
      res.converged = true;
      res.message = "objective change below tolerance";
      res.iterations = it + 1;
      break;
    }
    res.iterations = it + 1;
  }
  if (res.message.empty()) res.message = "iteration limit reached";
  return res;
}

}  // namespace microforge
