#pragma once

// Gaussian-process regression with a zero-mean prior and squared-exponential
// kernel
//
//     k(a, b) = sigma_f^2 * exp(-1/2 (a - b)^T W (a - b)),  W = diag(w_1..w_D)
//
// on observations y = f(x) + eps, eps ~ N(0, sigma_eps^2). Hyperparameters
// live in log space; the isotropic kernel ties all w_d to one value.

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "microforge/optim.hpp"

namespace microforge {

enum class KernelKind { Isotropic, ARD };

std::string_view kernel_name(KernelKind k) noexcept;
KernelKind parse_kernel(std::string_view name);

struct GPHyperparameters {
  Eigen::VectorXd log_w;            // log inverse squared lengthscales, size D
  double log_signal_variance = 0.0;  // log sigma_f^2
  double log_noise_variance = -std::numeric_limits<double>::infinity();  // log sigma_eps^2

  static GPHyperparameters from_natural(const Eigen::VectorXd& w, double signal_variance, double noise_variance);

  Eigen::Index dims() const noexcept { return log_w.size(); }
  Eigen::VectorXd w() const { return log_w.array().exp(); }
  double signal_variance() const { return std::exp(log_signal_variance); }
  double noise_variance() const { return std::exp(log_noise_variance); }

  /// Packed optimisation vector: [log w (1 or D)..., log sigma_f^2, log sigma_eps^2].
  Eigen::VectorXd pack(KernelKind kind) const;
  static GPHyperparameters unpack(const Eigen::VectorXd& v, KernelKind kind, Eigen::Index dims);
};

double kernel_se(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
                 const GPHyperparameters& hyp);

/// Sigma(X, X) without noise.
Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& X, const GPHyperparameters& hyp);

class IllConditionedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cholesky factor of K = Sigma + (sigma_eps^2 + jitter) I. The jitter is 0
/// when K factors as is, otherwise it escalates geometrically from 1e-8 to 1e-4.
struct CovarianceFactor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
};
CovarianceFactor factor_covariance(const Eigen::MatrixXd& X, const GPHyperparameters& hyp);

/// -log p(y | X, Theta) via Cholesky.
double nll(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GPHyperparameters& hyp);
/// Same, with the gradient with respect to the packed log-space vector.
double nll_with_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GPHyperparameters& hyp,
                         KernelKind kind, Eigen::VectorXd* grad);

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};

struct PredictionGradient {
  Eigen::VectorXd mean;     // d mu / dx
  Eigen::VectorXd std_dev;  // d sigma / dx, zero where sigma = 0
};

class GPModel {
 public:
  /// Conditions the GP on (X, y). y is centred by its sample mean unless
  /// `mean_offset` is given explicitly.
  GPModel(Eigen::MatrixXd X, Eigen::VectorXd y, GPHyperparameters hyp, KernelKind kind = KernelKind::Isotropic,
          std::optional<double> mean_offset = std::nullopt);

  GPModel(const GPModel& other);
  GPModel& operator=(const GPModel& other);

  Prediction predict(const Eigen::VectorXd& x) const;
  PredictionGradient predict_gradient(const Eigen::VectorXd& x) const;

  const Eigen::MatrixXd& inputs() const noexcept { return X_; }
  /// Targets as passed in (not centred).
  Eigen::VectorXd targets() const { return y_.array() + mean_offset_; }
  double mean_offset() const noexcept { return mean_offset_; }
  const GPHyperparameters& hyperparameters() const noexcept { return hyp_; }
  KernelKind kernel() const noexcept { return kind_; }
  double jitter() const noexcept { return factor_.jitter; }
  /// NLL of the centred targets.
  double nll() const noexcept { return nll_; }
  Eigen::Index dims() const noexcept { return X_.cols(); }
  Eigen::Index size() const noexcept { return X_.rows(); }
  /// Number of predictions whose variance was clamped at zero.
  std::size_t variance_clamps() const noexcept { return clamps_.load(); }

  void save(std::ostream& out) const;
  static GPModel load(std::istream& in);

 private:
  Eigen::VectorXd cross_covariance(const Eigen::VectorXd& x) const;

  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;  // centred
  double mean_offset_ = 0.0;
  GPHyperparameters hyp_;
  KernelKind kind_;
  CovarianceFactor factor_;
  Eigen::VectorXd alpha_;  // K^-1 y
  double nll_ = 0.0;
  mutable std::atomic<std::size_t> clamps_{0};
};

struct HyperparameterBounds {
  double log_w_lower = -10.0, log_w_upper = 10.0;
  double log_signal_lower = -10.0, log_signal_upper = 10.0;
  double log_noise_lower = -15.0, log_noise_upper = 5.0;
};

struct FitOptions {
  int starts = 5;
  std::uint64_t seed = 0;
  KernelKind kernel = KernelKind::Isotropic;
  HyperparameterBounds bounds;
  /// Replaces the first start when present.
  std::optional<GPHyperparameters> warm_start;
  BoxMinimiserOptions optimiser{.max_iterations = 200, .gradient_tolerance = 1e-6};
};

struct FitStart {
  Eigen::VectorXd initial;  // packed
  double initial_nll = 0.0;
  double final_nll = 0.0;
  bool usable = false;
  std::string message;
};

class FitError : public std::runtime_error {
 public:
  FitError(const std::string& what, std::vector<FitStart> starts)
      : std::runtime_error(what), starts_(std::move(starts)) {}
  const std::vector<FitStart>& starts() const noexcept { return starts_; }

 private:
  std::vector<FitStart> starts_;
};

struct FitResult {
  GPModel model;
  std::vector<FitStart> starts;
};

/// Multi-start NLL minimisation; starts are drawn by Latin hypercube over a
/// data-scaled initialisation box. Deterministic given `options.seed`.
FitResult fit_gp(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const FitOptions& options = {});

}  // namespace microforge
