#include "microforge/analysis.hpp"

#include <stdexcept>

namespace microforge {

PcaResult pca(const Eigen::MatrixXd& data) {
  if (data.rows() < 2 || data.cols() < 1) throw std::invalid_argument("PCA needs at least two rows");
  PcaResult r;
  r.mean = data.colwise().mean().transpose();
  const Eigen::MatrixXd centred = data.rowwise() - r.mean.transpose();
  const Eigen::MatrixXd cov = centred.transpose() * centred / static_cast<double>(data.rows() - 1);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw std::runtime_error("PCA eigen-decomposition failed");

  const Eigen::Index D = data.cols();
  // Eigen returns ascending order.
  r.eigenvalues = eig.eigenvalues().reverse().cwiseMax(0.0);
  r.components = eig.eigenvectors().rowwise().reverse();
  for (Eigen::Index k = 0; k < D; ++k) {
    Eigen::Index arg = 0;
    r.components.col(k).cwiseAbs().maxCoeff(&arg);
    if (r.components(arg, k) < 0.0) r.components.col(k) *= -1.0;
  }
  const double total = r.eigenvalues.sum();
  r.explained = total > 0.0 ? Eigen::VectorXd(r.eigenvalues / total) : Eigen::VectorXd::Zero(D);
  r.scores = centred * r.components;
  return r;
}

Eigen::MatrixXd PcaResult::reconstruct(Eigen::Index k) const {
  if (k < 0 || k > components.cols()) throw std::invalid_argument("component count out of range");
  const Eigen::MatrixXd back = scores.leftCols(k) * components.leftCols(k).transpose();
  return back.rowwise() + mean.transpose();
}

Eigen::MatrixXd latent_matrix(const std::vector<TraceRecord>& records) {
  if (records.empty()) return {};
  const auto D = static_cast<Eigen::Index>(records.front().z.size());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(records.size()), D);
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (static_cast<Eigen::Index>(records[i].z.size()) != D) throw std::invalid_argument("latent sizes differ");
    for (Eigen::Index d = 0; d < D; ++d) m(static_cast<Eigen::Index>(i), d) = records[i].z[static_cast<std::size_t>(d)];
  }
  return m;
}

}  // namespace microforge
