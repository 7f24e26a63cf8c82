#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace microforge {

/// n x D Latin hypercube in [0, 1): in every column each of the n equal bins
/// [k/n, (k+1)/n) holds exactly one sample, jittered uniformly inside it.
Eigen::MatrixXd latin_hypercube(int n, int dims, std::uint64_t seed);

}  // namespace microforge
