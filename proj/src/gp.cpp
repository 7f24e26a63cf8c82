#include "microforge/gp.hpp"

#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "microforge/lhs.hpp"
#include "microforge/rng.hpp"
#include "microforge/text.hpp"

namespace microforge {

namespace {

constexpr double kJitterStart = 1e-8;
constexpr double kJitterMax = 1e-4;
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double noise_of(const GPHyperparameters& hyp) {
  return std::isfinite(hyp.log_noise_variance) ? std::exp(hyp.log_noise_variance) : 0.0;
}

std::string join(const Eigen::VectorXd& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += text::format_double(v[i]);
  }
  return s;
}

Eigen::VectorXd parse_row(std::string_view line) {
  const auto cells = text::split(text::trim(line), ',');
  Eigen::VectorXd v(static_cast<Eigen::Index>(cells.size()));
  for (std::size_t i = 0; i < cells.size(); ++i) v[static_cast<Eigen::Index>(i)] = text::parse_double(cells[i]);
  return v;
}

}  // namespace

std::string_view kernel_name(KernelKind k) noexcept { return k == KernelKind::ARD ? "ard" : "isotropic"; }

KernelKind parse_kernel(std::string_view name) {
  if (name == "ard") return KernelKind::ARD;
  if (name == "isotropic" || name == "iso") return KernelKind::Isotropic;
  throw std::invalid_argument("unknown kernel '" + std::string(name) + "' (expected isotropic or ard)");
}

GPHyperparameters GPHyperparameters::from_natural(const Eigen::VectorXd& w, double signal_variance,
                                                  double noise_variance) {
  GPHyperparameters h;
  h.log_w = w.array().log();
  h.log_signal_variance = std::log(signal_variance);
  h.log_noise_variance = noise_variance > 0.0 ? std::log(noise_variance) : -std::numeric_limits<double>::infinity();
  return h;
}

Eigen::VectorXd GPHyperparameters::pack(KernelKind kind) const {
  const Eigen::Index nw = kind == KernelKind::ARD ? dims() : 1;
  Eigen::VectorXd v(nw + 2);
  if (kind == KernelKind::ARD) {
    v.head(nw) = log_w;
  } else {
    v[0] = log_w.size() > 0 ? log_w.mean() : 0.0;
  }
  v[nw] = log_signal_variance;
  v[nw + 1] = log_noise_variance;
  return v;
}

GPHyperparameters GPHyperparameters::unpack(const Eigen::VectorXd& v, KernelKind kind, Eigen::Index dims) {
  GPHyperparameters h;
  const Eigen::Index nw = kind == KernelKind::ARD ? dims : 1;
  if (v.size() != nw + 2) throw std::invalid_argument("packed hyperparameter vector has the wrong size");
  h.log_w = kind == KernelKind::ARD ? Eigen::VectorXd(v.head(nw)) : Eigen::VectorXd::Constant(dims, v[0]);
  h.log_signal_variance = v[nw];
  h.log_noise_variance = v[nw + 1];
  return h;
}

double kernel_se(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
                 const GPHyperparameters& hyp) {
  const Eigen::ArrayXd diff = (a - b).array();
  const double r2 = (diff.square() * hyp.log_w.array().exp()).sum();
  return hyp.signal_variance() * std::exp(-0.5 * r2);
}

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& X, const GPHyperparameters& hyp) {
  const Eigen::Index n = X.rows();
  const Eigen::ArrayXd w = hyp.log_w.array().exp();
  const double sf2 = hyp.signal_variance();
  Eigen::MatrixXd S(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    S(i, i) = sf2;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double r2 = ((X.row(i) - X.row(j)).array().square().transpose() * w).sum();
      S(i, j) = S(j, i) = sf2 * std::exp(-0.5 * r2);
    }
  }
  return S;
}

namespace {

// Tries K = S + noise I unjittered, then escalates the jitter 1e-8 .. 1e-4.
CovarianceFactor factor_with_jitter(const Eigen::MatrixXd& S, double noise) {
  CovarianceFactor f;
  for (double jitter = 0.0; jitter <= kJitterMax * (1.0 + 1e-9); jitter = jitter == 0.0 ? kJitterStart : 10.0 * jitter) {
    Eigen::MatrixXd K = S;
    K.diagonal().array() += noise + jitter;
    f.llt.compute(K);
    if (f.llt.info() == Eigen::Success && (f.llt.matrixLLT().diagonal().array() > 0.0).all()) {
      f.jitter = jitter;
      return f;
    }
  }
  throw IllConditionedError("covariance matrix is not positive definite even with jitter 1e-4");
}

}  // namespace

CovarianceFactor factor_covariance(const Eigen::MatrixXd& X, const GPHyperparameters& hyp) {
  return factor_with_jitter(kernel_matrix(X, hyp), noise_of(hyp));
}

double nll(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GPHyperparameters& hyp) {
  const auto f = factor_covariance(X, hyp);
  const Eigen::VectorXd alpha = f.llt.solve(y);
  const double log_det_half = f.llt.matrixLLT().diagonal().array().log().sum();
  return 0.5 * y.dot(alpha) + log_det_half + static_cast<double>(y.size()) * kHalfLog2Pi;
}

double nll_with_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GPHyperparameters& hyp,
                         KernelKind kind, Eigen::VectorXd* grad) {
  const Eigen::Index n = X.rows();
  const Eigen::Index D = X.cols();
  const Eigen::MatrixXd S = kernel_matrix(X, hyp);
  const double noise = noise_of(hyp);
  const CovarianceFactor f = factor_with_jitter(S, noise);

  const Eigen::VectorXd alpha = f.llt.solve(y);
  const double value = 0.5 * y.dot(alpha) + f.llt.matrixLLT().diagonal().array().log().sum() +
                       static_cast<double>(n) * kHalfLog2Pi;
  if (!grad) return value;

  // dNLL/dtheta = 1/2 tr(Q dK/dtheta) with Q = K^-1 - alpha alpha^T.
  const Eigen::MatrixXd Q = f.llt.solve(Eigen::MatrixXd::Identity(n, n)) - alpha * alpha.transpose();
  const Eigen::MatrixXd QS = Q.cwiseProduct(S);
  const Eigen::Index nw = kind == KernelKind::ARD ? D : 1;
  grad->resize(nw + 2);
  const Eigen::ArrayXd w = hyp.log_w.array().exp();
  Eigen::VectorXd gw = Eigen::VectorXd::Zero(D);
  for (Eigen::Index d = 0; d < D; ++d) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < i; ++j) {
        const double diff = X(i, d) - X(j, d);
        acc += QS(i, j) * diff * diff;
      }
    }
    // Symmetric off-diagonal pairs counted twice; dK_ij = -1/2 w_d diff^2 S_ij.
    gw[d] = 0.5 * 2.0 * acc * (-0.5 * w[d]);
  }
  if (kind == KernelKind::ARD) {
    grad->head(D) = gw;
  } else {
    (*grad)[0] = gw.sum();
  }
  (*grad)[nw] = 0.5 * QS.sum();
  (*grad)[nw + 1] = 0.5 * noise * Q.trace();
  return value;
}

GPModel::GPModel(Eigen::MatrixXd X, Eigen::VectorXd y, GPHyperparameters hyp, KernelKind kind,
                 std::optional<double> mean_offset)
    : X_(std::move(X)), hyp_(std::move(hyp)), kind_(kind) {
  if (X_.rows() != y.size()) throw std::invalid_argument("GP inputs and targets differ in length");
  if (X_.rows() < 1) throw std::invalid_argument("GP needs at least one training point");
  if (hyp_.dims() != X_.cols()) throw std::invalid_argument("hyperparameter dimension does not match inputs");
  mean_offset_ = mean_offset ? *mean_offset : y.mean();
  y_ = y.array() - mean_offset_;
  factor_ = factor_covariance(X_, hyp_);
  alpha_ = factor_.llt.solve(y_);
  nll_ = 0.5 * y_.dot(alpha_) + factor_.llt.matrixLLT().diagonal().array().log().sum() +
         static_cast<double>(y_.size()) * kHalfLog2Pi;
}

GPModel::GPModel(const GPModel& o)
    : X_(o.X_),
      y_(o.y_),
      mean_offset_(o.mean_offset_),
      hyp_(o.hyp_),
      kind_(o.kind_),
      factor_(o.factor_),
      alpha_(o.alpha_),
      nll_(o.nll_),
      clamps_(o.clamps_.load()) {}

GPModel& GPModel::operator=(const GPModel& o) {
  if (this != &o) {
    X_ = o.X_;
    y_ = o.y_;
    mean_offset_ = o.mean_offset_;
    hyp_ = o.hyp_;
    kind_ = o.kind_;
    factor_ = o.factor_;
    alpha_ = o.alpha_;
    nll_ = o.nll_;
    clamps_.store(o.clamps_.load());
  }
  return *this;
}

Eigen::VectorXd GPModel::cross_covariance(const Eigen::VectorXd& x) const {
  if (x.size() != X_.cols()) throw std::invalid_argument("query point has the wrong dimension");
  const Eigen::ArrayXd w = hyp_.log_w.array().exp();
  const double sf2 = hyp_.signal_variance();
  Eigen::VectorXd k(X_.rows());
  for (Eigen::Index i = 0; i < X_.rows(); ++i) {
    const double r2 = ((X_.row(i).transpose() - x).array().square() * w).sum();
    k[i] = sf2 * std::exp(-0.5 * r2);
  }
  return k;
}

Prediction GPModel::predict(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd k = cross_covariance(x);
  Prediction p;
  p.mean = k.dot(alpha_) + mean_offset_;
  const Eigen::VectorXd v = factor_.llt.matrixL().solve(k);
  p.variance = hyp_.signal_variance() - v.squaredNorm();
  if (p.variance < 0.0) {
    p.variance = 0.0;
    clamps_.fetch_add(1);
  }
  return p;
}

PredictionGradient GPModel::predict_gradient(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd k = cross_covariance(x);
  const Eigen::ArrayXd w = hyp_.log_w.array().exp();
  // J(i, :) = d k_i / dx = -k_i W (x - x_i)
  Eigen::MatrixXd J(X_.rows(), X_.cols());
  for (Eigen::Index i = 0; i < X_.rows(); ++i) {
    J.row(i) = (-k[i] * (x - X_.row(i).transpose()).array() * w).matrix().transpose();
  }
  PredictionGradient g;
  g.mean = J.transpose() * alpha_;
  const Eigen::VectorXd Kinv_k = factor_.llt.solve(k);
  const double var = hyp_.signal_variance() - k.dot(Kinv_k);
  if (var > 0.0) {
    const Eigen::VectorXd dvar = -2.0 * J.transpose() * Kinv_k;
    g.std_dev = dvar / (2.0 * std::sqrt(var));
  } else {
    g.std_dev = Eigen::VectorXd::Zero(X_.cols());
  }
  return g;
}

void GPModel::save(std::ostream& out) const {
  out << "microforge-gp 1\n";
  out << "kernel=" << kernel_name(kind_) << '\n';
  out << "D=" << X_.cols() << '\n';
  out << "N=" << X_.rows() << '\n';
  out << "log_w=" << join(hyp_.log_w) << '\n';
  out << "log_signal_variance=" << text::format_double(hyp_.log_signal_variance) << '\n';
  out << "log_noise_variance=" << text::format_double(hyp_.log_noise_variance) << '\n';
  out << "mean_offset=" << text::format_double(mean_offset_) << '\n';
  out << "X\n";
  for (Eigen::Index i = 0; i < X_.rows(); ++i) out << join(X_.row(i).transpose()) << '\n';
  out << "y\n";
  const Eigen::VectorXd y = targets();
  for (Eigen::Index i = 0; i < y.size(); ++i) out << text::format_double(y[i]) << '\n';
}

GPModel GPModel::load(std::istream& in) {
  std::string line;
  auto next = [&]() -> std::string {
    if (!std::getline(in, line)) throw std::runtime_error("truncated GP checkpoint");
    return line;
  };
  auto value_of = [&](std::string_view key) {
    const std::string l = next();
    const std::string prefix = std::string(key) + "=";
    if (l.rfind(prefix, 0) != 0) throw std::runtime_error("GP checkpoint: expected '" + prefix + "'");
    return l.substr(prefix.size());
  };
  if (text::trim(next()) != "microforge-gp 1") throw std::runtime_error("not a GP checkpoint");
  const KernelKind kind = parse_kernel(text::trim(value_of("kernel")));
  const auto D = text::parse_int<Eigen::Index>(value_of("D"));
  const auto N = text::parse_int<Eigen::Index>(value_of("N"));
  GPHyperparameters hyp;
  hyp.log_w = parse_row(value_of("log_w"));
  hyp.log_signal_variance = text::parse_double(value_of("log_signal_variance"));
  hyp.log_noise_variance = text::parse_double(value_of("log_noise_variance"));
  const double offset = text::parse_double(value_of("mean_offset"));
  if (text::trim(next()) != "X") throw std::runtime_error("GP checkpoint: expected 'X'");
  Eigen::MatrixXd X(N, D);
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto row = parse_row(next());
    if (row.size() != D) throw std::runtime_error("GP checkpoint: input row has the wrong width");
    X.row(i) = row.transpose();
  }
  if (text::trim(next()) != "y") throw std::runtime_error("GP checkpoint: expected 'y'");
  Eigen::VectorXd y(N);
  for (Eigen::Index i = 0; i < N; ++i) y[i] = text::parse_double(next());
  return GPModel(std::move(X), std::move(y), std::move(hyp), kind, offset);
}

FitResult fit_gp(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const FitOptions& options) {
  if (X.rows() < 2) throw std::invalid_argument("fitting needs at least two training points");
  if (options.starts < 1) throw std::invalid_argument("fitting needs at least one start");
  const Eigen::Index D = X.cols();
  const KernelKind kind = options.kernel;
  const Eigen::Index nw = kind == KernelKind::ARD ? D : 1;
  const Eigen::Index np = nw + 2;
  const auto& b = options.bounds;

  const double offset = y.mean();
  const Eigen::VectorXd yc = y.array() - offset;
  const double var_y = std::max(yc.squaredNorm() / static_cast<double>(yc.size()), 1e-12);
  const double log_var = std::log(var_y);

  Eigen::VectorXd lower(np), upper(np), init_lo(np), init_hi(np);
  lower.head(nw).setConstant(b.log_w_lower);
  upper.head(nw).setConstant(b.log_w_upper);
  lower[nw] = b.log_signal_lower;
  upper[nw] = b.log_signal_upper;
  lower[nw + 1] = b.log_noise_lower;
  upper[nw + 1] = b.log_noise_upper;
  init_lo.head(nw).setConstant(-3.0);
  init_hi.head(nw).setConstant(4.0);
  init_lo[nw] = log_var - 1.0;
  init_hi[nw] = log_var + 1.0;
  init_lo[nw + 1] = log_var - 10.0;
  init_hi[nw + 1] = log_var - 2.0;
  init_lo = project_to_box(init_lo, lower, upper);
  init_hi = project_to_box(init_hi, lower, upper);

  const Eigen::MatrixXd design = latin_hypercube(options.starts, static_cast<int>(np), options.seed);
  std::vector<Eigen::VectorXd> initial;
  for (int s = 0; s < options.starts; ++s) {
    initial.push_back(init_lo + (init_hi - init_lo).cwiseProduct(design.row(s).transpose()));
  }
  if (options.warm_start) {
    Eigen::VectorXd w = options.warm_start->pack(kind);
    if (!std::isfinite(w[nw + 1])) w[nw + 1] = b.log_noise_lower;
    initial[0] = project_to_box(w, lower, upper);
  }

  const ObjectiveFn objective = [&](const Eigen::VectorXd& v, Eigen::VectorXd* g) {
    try {
      return nll_with_gradient(X, yc, GPHyperparameters::unpack(v, kind, D), kind, g);
    } catch (const IllConditionedError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  std::vector<FitStart> starts;
  int best = -1;
  Eigen::VectorXd best_x;
  double best_value = std::numeric_limits<double>::infinity();
  for (int s = 0; s < options.starts; ++s) {
    FitStart st;
    st.initial = initial[static_cast<std::size_t>(s)];
    const auto res = minimise_box(objective, st.initial, lower, upper, options.optimiser);
    st.initial_nll = res.initial_value;
    st.final_nll = res.value;
    st.usable = std::isfinite(res.value);
    st.message = res.message;
    if (st.usable && res.value < best_value) {
      best_value = res.value;
      best = s;
      best_x = res.x;
    }
    starts.push_back(std::move(st));
  }
  if (best < 0) {
    std::ostringstream os;
    os << "GP fit failed in all " << options.starts << " starts";
    for (const auto& st : starts) os << "; " << st.message;
    throw FitError(os.str(), std::move(starts));
  }
  GPModel model(X, y, GPHyperparameters::unpack(best_x, kind, D), kind, offset);
  return FitResult{std::move(model), std::move(starts)};
}

}  // namespace microforge
