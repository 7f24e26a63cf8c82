#include "microforge/lhs.hpp"

#include <numeric>
#include <stdexcept>
#include <vector>

#include "microforge/rng.hpp"

namespace microforge {

Eigen::MatrixXd latin_hypercube(int n, int dims, std::uint64_t seed) {
  if (n < 1 || dims < 1) throw std::invalid_argument("latin_hypercube needs n >= 1 and dims >= 1");
  Rng rng(seed);
  Eigen::MatrixXd out(n, dims);
  std::vector<int> bins(static_cast<std::size_t>(n));
  for (int d = 0; d < dims; ++d) {
    std::iota(bins.begin(), bins.end(), 0);
    rng.shuffle(std::span<int>(bins));
    for (int i = 0; i < n; ++i) {
      // unit_open keeps the offset strictly inside the bin.
      const double u = unit_open(rng.bits());
      out(i, d) = (static_cast<double>(bins[static_cast<std::size_t>(i)]) + u) / static_cast<double>(n);
    }
  }
  return out;
}

}  // namespace microforge
