#pragma once

// Bayesian optimisation over a box-bounded latent space.
//
// The loop maximises a black-box objective f. Internally the GP models -f
// on inputs scaled to [0, 1]^D, and each iteration minimises the lower
// confidence bound mu(x) - alpha_i sigma(x) of that GP, with alpha_i
// decaying linearly from 1.96 to 0 over the run.

#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "microforge/genlat.hpp"
#include "microforge/gp.hpp"
#include "microforge/lhs.hpp"
#include "microforge/optim.hpp"
#include "microforge/props.hpp"

namespace microforge {

/// Box [lower, upper]^D with an affine map to the unit cube.
struct DesignSpace {
  int dims = 64;
  double lower = kLatentLower;
  double upper = kLatentUpper;

  void validate() const;
  Eigen::VectorXd to_unit(const Eigen::VectorXd& z) const;
  Eigen::VectorXd from_unit(const Eigen::VectorXd& u) const;
};

/// n x D Latin hypercube in [0, 1).
inline Eigen::MatrixXd lhs(int n, int dims, std::uint64_t seed) { return latin_hypercube(n, dims, seed); }

/// 1.96 (1 - i / i_tot).
double alpha_schedule(int i, int i_tot);

/// mu(x) - alpha sigma(x) of a fitted GP, with its gradient.
class Acquisition {
 public:
  Acquisition(const GPModel& model, double alpha);

  double operator()(const Eigen::VectorXd& x, Eigen::VectorXd* grad = nullptr) const;
  double alpha() const noexcept { return alpha_; }

 private:
  const GPModel* model_;
  double alpha_;
};

struct AcquisitionOptions {
  int starts = 5;
  /// Candidate pool (a Latin hypercube of this size plus the training
  /// inputs) from which the `starts` best points seed the local searches.
  int screening_points = 256;
  std::uint64_t seed = 0;
  BoxMinimiserOptions local{.max_iterations = 200, .gradient_tolerance = 1e-6};
};

struct AcquisitionResult {
  Eigen::VectorXd x;  // unit cube
  double value = 0.0;
  /// False when no local search improved on its starting point.
  bool improved = false;
};

/// Multi-start box-constrained minimisation of the acquisition in [0, 1]^D.
/// Starts are nested: more starts never give a higher returned value.
AcquisitionResult minimise_acquisition(const GPModel& model, double alpha, const AcquisitionOptions& options = {});

/// Result of one black-box evaluation.
struct Outcome {
  bool ok = false;
  double value = std::numeric_limits<double>::quiet_NaN();
  std::optional<PropertyReport> report;
  std::string error;

  static Outcome success(double value, std::optional<PropertyReport> report = std::nullopt);
  static Outcome failure(std::string error, std::optional<PropertyReport> report = std::nullopt);
};

class BlackBox {
 public:
  virtual ~BlackBox() = default;
  /// Evaluates the initial design. Problems whose objective depends on
  /// statistics of the design override this to freeze them first.
  virtual std::vector<Outcome> evaluate_design(const std::vector<LatentVector>& design);
  virtual Outcome evaluate(const LatentVector& z) = 0;
};

/// Adapts a plain function of z.
class FunctionBlackBox final : public BlackBox {
 public:
  explicit FunctionBlackBox(std::function<double(const LatentVector&)> f) : f_(std::move(f)) {}
  Outcome evaluate(const LatentVector& z) override;

 private:
  std::function<double(const LatentVector&)> f_;
};

struct EarlyStop {
  /// Stop when the best value has not improved by more than `tolerance`
  /// over the last `patience` iterations.
  int patience = 0;
  double tolerance = 0.0;
};

enum class RecordKind { Design, Iteration };

struct TraceRecord {
  int index = 0;       // position in the trace
  RecordKind kind = RecordKind::Design;
  int iteration = -1;  // loop iteration, -1 for design points
  double alpha = std::numeric_limits<double>::quiet_NaN();
  LatentVector z;
  bool ok = false;
  double objective = std::numeric_limits<double>::quiet_NaN();
  double best_so_far = std::numeric_limits<double>::quiet_NaN();
  std::optional<PropertyReport> report;
  double gp_nll = std::numeric_limits<double>::quiet_NaN();
  double acquisition = std::numeric_limits<double>::quiet_NaN();
  bool acquisition_improved = true;
  std::string error;
  /// Not part of the reproducible record.
  double wall_seconds = 0.0;
};

struct LoopConfig {
  int n_init = 50;
  int i_tot = 500;
  std::uint64_t seed = 0;
  KernelKind kernel = KernelKind::Isotropic;
  int gp_starts = 5;
  AcquisitionOptions acquisition;  // seed is replaced per iteration
  bool fail_hard = false;
  std::optional<EarlyStop> early_stop;
  /// Called after every appended record (design and iteration).
  std::function<void(const TraceRecord&)> on_record;
  /// Called after each iteration's GP fit.
  std::function<void(int iteration, const GPModel&)> on_model;

  void validate() const;
};

struct OptimisationTrace {
  std::vector<TraceRecord> records;
  std::optional<GPModel> final_model;
  int completed_iterations = 0;
  bool stopped_early = false;

  /// Index of the best successful record, if any.
  std::optional<std::size_t> best_index() const;
  std::vector<double> best_so_far() const;
};

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Seed for stream `stream`, step `step` of a run seeded with `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::int64_t step);

OptimisationTrace run_loop(BlackBox& black_box, const DesignSpace& space, const LoopConfig& config);

}  // namespace microforge
