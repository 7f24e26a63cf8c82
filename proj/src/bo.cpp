#include "microforge/bo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "microforge/rng.hpp"

namespace microforge {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

LatentVector to_latent(const Eigen::VectorXd& z) { return LatentVector(std::vector<double>(z.data(), z.data() + z.size())); }

Eigen::VectorXd to_eigen(const LatentVector& z) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(z.size()));
  for (std::size_t i = 0; i < z.size(); ++i) v[static_cast<Eigen::Index>(i)] = z[i];
  return v;
}

}  // namespace

void DesignSpace::validate() const {
  if (dims < 1) throw std::invalid_argument("design space needs at least one dimension");
  if (!(lower < upper)) throw std::invalid_argument("design space lower bound must be below the upper bound");
}

Eigen::VectorXd DesignSpace::to_unit(const Eigen::VectorXd& z) const {
  return (z.array() - lower) / (upper - lower);
}

Eigen::VectorXd DesignSpace::from_unit(const Eigen::VectorXd& u) const {
  return (lower + (upper - lower) * u.array()).cwiseMax(lower).cwiseMin(upper);
}

double alpha_schedule(int i, int i_tot) {
  if (i_tot < 1) throw std::invalid_argument("alpha_schedule needs i_tot >= 1");
  if (i < 0 || i > i_tot) throw std::invalid_argument("alpha_schedule needs 0 <= i <= i_tot");
  return 1.96 * (1.0 - static_cast<double>(i) / static_cast<double>(i_tot));
}

Acquisition::Acquisition(const GPModel& model, double alpha) : model_(&model), alpha_(alpha) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("acquisition alpha must be non-negative");
}

double Acquisition::operator()(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
  const Prediction p = model_->predict(x);
  const double sigma = std::sqrt(p.variance);
  if (grad) {
    const PredictionGradient g = model_->predict_gradient(x);
    *grad = g.mean - alpha_ * g.std_dev;
  }
  return p.mean - alpha_ * sigma;
}

AcquisitionResult minimise_acquisition(const GPModel& model, double alpha, const AcquisitionOptions& options) {
  if (options.starts < 1) throw std::invalid_argument("acquisition search needs at least one start");
  const Eigen::Index D = model.dims();
  const Acquisition acq(model, alpha);

  // Candidate pool: deterministic design plus the training inputs.
  const Eigen::MatrixXd design = latin_hypercube(std::max(options.screening_points, 1), static_cast<int>(D), options.seed);
  std::vector<Eigen::VectorXd> pool;
  pool.reserve(static_cast<std::size_t>(design.rows() + model.size()));
  for (Eigen::Index i = 0; i < design.rows(); ++i) pool.emplace_back(design.row(i).transpose());
  for (Eigen::Index i = 0; i < model.size(); ++i) pool.emplace_back(model.inputs().row(i).transpose());

  std::vector<double> screened(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) screened[i] = acq(pool[i]);
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    // Non-finite screening values sort last.
    const bool fa = std::isfinite(screened[a]), fb = std::isfinite(screened[b]);
    if (fa != fb) return fa;
    return screened[a] < screened[b];
  });

  const Eigen::VectorXd lo = Eigen::VectorXd::Zero(D);
  const Eigen::VectorXd hi = Eigen::VectorXd::Ones(D);
  const ObjectiveFn f = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) { return acq(x, g); };

  AcquisitionResult best;
  best.value = std::numeric_limits<double>::infinity();
  const std::size_t n = std::min(order.size(), static_cast<std::size_t>(options.starts));
  for (std::size_t s = 0; s < n; ++s) {
    const Eigen::VectorXd& x0 = pool[order[s]];
    const MinimiseResult r = minimise_box(f, x0, lo, hi, options.local);
    best.improved = best.improved || r.improved();
    const double v = std::isfinite(r.value) ? r.value : screened[order[s]];
    const Eigen::VectorXd& x = std::isfinite(r.value) ? r.x : x0;
    if (best.x.size() == 0 || v < best.value) {
      best.value = v;
      best.x = project_to_box(x, lo, hi);
    }
  }
  return best;
}

Outcome Outcome::success(double value, std::optional<PropertyReport> report) {
  Outcome o;
  o.ok = true;
  o.value = value;
  o.report = std::move(report);
  return o;
}

Outcome Outcome::failure(std::string error, std::optional<PropertyReport> report) {
  Outcome o;
  o.ok = false;
  o.error = std::move(error);
  o.report = std::move(report);
  return o;
}

std::vector<Outcome> BlackBox::evaluate_design(const std::vector<LatentVector>& design) {
  std::vector<Outcome> out;
  out.reserve(design.size());
  for (const auto& z : design) out.push_back(evaluate(z));
  return out;
}

Outcome FunctionBlackBox::evaluate(const LatentVector& z) {
  const double v = f_(z);
  if (!std::isfinite(v)) return Outcome::failure("objective is not finite");
  return Outcome::success(v);
}

void LoopConfig::validate() const {
  if (n_init < 2) throw std::invalid_argument("n_init must be at least 2");
  if (i_tot < 0) throw std::invalid_argument("i_tot must be non-negative");
  if (gp_starts < 1) throw std::invalid_argument("gp_starts must be at least 1");
  if (acquisition.starts < 1) throw std::invalid_argument("acquisition starts must be at least 1");
  if (early_stop && early_stop->patience < 1) throw std::invalid_argument("early-stop patience must be at least 1");
}

std::optional<std::size_t> OptimisationTrace::best_index() const {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].ok && (!best || records[i].objective > records[*best].objective)) best = i;
  }
  return best;
}

std::vector<double> OptimisationTrace::best_so_far() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.best_so_far);
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::int64_t step) {
  return hash_coords(seed, stream, step, 0, 0);
}

OptimisationTrace run_loop(BlackBox& black_box, const DesignSpace& space, const LoopConfig& config) {
  space.validate();
  config.validate();
  const int D = space.dims;

  OptimisationTrace trace;
  std::vector<Eigen::VectorXd> train_x;  // unit cube
  std::vector<double> train_y;           // negated objective
  double best = std::numeric_limits<double>::quiet_NaN();

  auto append = [&](TraceRecord rec) {
    rec.index = static_cast<int>(trace.records.size());
    if (rec.ok && (std::isnan(best) || rec.objective > best)) best = rec.objective;
    rec.best_so_far = best;
    trace.records.push_back(std::move(rec));
    if (config.on_record) config.on_record(trace.records.back());
  };

  // Initial design.
  const auto t_design = Clock::now();
  const Eigen::MatrixXd unit_design = lhs(config.n_init, D, derive_seed(config.seed, 0, 0));
  std::vector<LatentVector> design;
  design.reserve(static_cast<std::size_t>(config.n_init));
  for (int i = 0; i < config.n_init; ++i) design.push_back(to_latent(space.from_unit(unit_design.row(i).transpose())));
  std::vector<Outcome> outcomes = black_box.evaluate_design(design);
  if (outcomes.size() != design.size()) throw std::logic_error("evaluate_design returned the wrong number of outcomes");
  const double design_seconds = seconds_since(t_design) / static_cast<double>(design.size());
  for (std::size_t i = 0; i < design.size(); ++i) {
    Outcome& o = outcomes[i];
    if (!o.ok && config.fail_hard) throw EvaluationError("design point " + std::to_string(i) + ": " + o.error);
    TraceRecord rec;
    rec.kind = RecordKind::Design;
    rec.z = design[i];
    rec.ok = o.ok;
    rec.objective = o.ok ? o.value : std::numeric_limits<double>::quiet_NaN();
    rec.report = std::move(o.report);
    rec.error = std::move(o.error);
    rec.wall_seconds = design_seconds;
    if (rec.ok) {
      train_x.push_back(space.to_unit(to_eigen(rec.z)));
      train_y.push_back(-rec.objective);
    }
    append(std::move(rec));
  }
  if (config.i_tot == 0) return trace;
  if (train_x.size() < 2) throw EvaluationError("fewer than two design points evaluated successfully");

  std::optional<GPHyperparameters> warm;
  std::vector<double> best_history;
  for (int i = 0; i < config.i_tot; ++i) {
    const auto t0 = Clock::now();
    Eigen::MatrixXd X(static_cast<Eigen::Index>(train_x.size()), D);
    Eigen::VectorXd Y(static_cast<Eigen::Index>(train_y.size()));
    for (std::size_t r = 0; r < train_x.size(); ++r) {
      X.row(static_cast<Eigen::Index>(r)) = train_x[r].transpose();
      Y[static_cast<Eigen::Index>(r)] = train_y[r];
    }
    FitOptions fit;
    fit.starts = config.gp_starts;
    fit.seed = derive_seed(config.seed, 1, i);
    fit.kernel = config.kernel;
    fit.warm_start = warm;
    FitResult fitted = fit_gp(X, Y, fit);
    warm = fitted.model.hyperparameters();
    if (config.on_model) config.on_model(i, fitted.model);

    const double alpha = alpha_schedule(i, config.i_tot);
    AcquisitionOptions acq = config.acquisition;
    acq.seed = derive_seed(config.seed, 2, i);
    const AcquisitionResult next = minimise_acquisition(fitted.model, alpha, acq);

    TraceRecord rec;
    rec.kind = RecordKind::Iteration;
    rec.iteration = i;
    rec.alpha = alpha;
    rec.z = to_latent(space.from_unit(next.x));
    rec.gp_nll = fitted.model.nll();
    rec.acquisition = next.value;
    rec.acquisition_improved = next.improved;

    Outcome o = black_box.evaluate(rec.z);
    if (!o.ok && config.fail_hard) throw EvaluationError("iteration " + std::to_string(i) + ": " + o.error);
    rec.ok = o.ok;
    rec.objective = o.ok ? o.value : std::numeric_limits<double>::quiet_NaN();
    rec.report = std::move(o.report);
    rec.error = std::move(o.error);
    if (rec.ok) {
      train_x.push_back(space.to_unit(to_eigen(rec.z)));
      train_y.push_back(-rec.objective);
    }
    rec.wall_seconds = seconds_since(t0);
    append(std::move(rec));
    trace.final_model = std::move(fitted.model);
    trace.completed_iterations = i + 1;

    best_history.push_back(best);
    if (config.early_stop) {
      const int p = config.early_stop->patience;
      if (static_cast<int>(best_history.size()) > p) {
        const double then = best_history[best_history.size() - 1 - static_cast<std::size_t>(p)];
        if (!(best - then > config.early_stop->tolerance)) {
          trace.stopped_early = true;
          break;
        }
      }
    }
  }
  return trace;
}

}  // namespace microforge
