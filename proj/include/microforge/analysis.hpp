#pragma once

// Post-processing of latent samples and traces into plot-ready tables.

#include <vector>

#include <Eigen/Dense>

#include "microforge/bo.hpp"

namespace microforge {

struct PcaResult {
  Eigen::VectorXd mean;            // per column of the data
  Eigen::MatrixXd components;      // D x D, column k is the k-th principal axis
  Eigen::VectorXd eigenvalues;     // descending, clamped at 0
  Eigen::VectorXd explained;       // eigenvalues / sum; all zero for constant data
  Eigen::MatrixXd scores;          // N x D projections of the centred rows

  /// Rows rebuilt from the first `k` components.
  Eigen::MatrixXd reconstruct(Eigen::Index k) const;
};

/// Covariance eigen-decomposition of the rows of `data` (N x D, N >= 2).
/// Each axis is signed so its largest-magnitude loading is positive.
PcaResult pca(const Eigen::MatrixXd& data);

/// Latent vectors of the trace records as rows.
Eigen::MatrixXd latent_matrix(const std::vector<TraceRecord>& records);

}  // namespace microforge
