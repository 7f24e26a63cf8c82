#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "microforge/lhs.hpp"
#include "microforge/optim.hpp"

using namespace microforge;

TEST_CASE("Latin hypercube hits every bin once per column") {
  const auto M = latin_hypercube(50, 64, 7);
  REQUIRE(M.rows() == 50);
  REQUIRE(M.cols() == 64);
  for (Eigen::Index c = 0; c < 64; ++c) {
    std::vector<int> bins;
    for (Eigen::Index r = 0; r < 50; ++r) {
      CHECK(M(r, c) >= 0.0);
      CHECK(M(r, c) < 1.0);
      bins.push_back(static_cast<int>(std::floor(M(r, c) * 50.0)));
    }
    std::sort(bins.begin(), bins.end());
    std::vector<int> expected(50);
    std::iota(expected.begin(), expected.end(), 0);
    CHECK(bins == expected);
  }
}

TEST_CASE("single-point hypercube lies inside the open cube") {
  const auto M = latin_hypercube(1, 8, 3);
  for (Eigen::Index c = 0; c < 8; ++c) {
    CHECK(M(0, c) > 0.0);
    CHECK(M(0, c) < 1.0);
  }
}

TEST_CASE("hypercubes are deterministic per seed") {
  CHECK(latin_hypercube(20, 5, 1) == latin_hypercube(20, 5, 1));
  CHECK(latin_hypercube(20, 5, 1) != latin_hypercube(20, 5, 2));
  CHECK_THROWS(latin_hypercube(0, 3, 1));
  CHECK_THROWS(latin_hypercube(3, 0, 1));
}

TEST_CASE("projection onto a box") {
  Eigen::VectorXd x(3), lo(3), hi(3);
  x << -2.0, 0.5, 9.0;
  lo << -1.0, 0.0, 0.0;
  hi << 1.0, 1.0, 1.0;
  const auto p = project_to_box(x, lo, hi);
  CHECK(p(0) == -1.0);
  CHECK(p(1) == 0.5);
  CHECK(p(2) == 1.0);
}

TEST_CASE("quadratic with an interior minimum") {
  Eigen::VectorXd c(3);
  c << 0.3, -0.2, 0.7;
  const ObjectiveFn f = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    if (g) *g = 2.0 * (x - c);
    return (x - c).squaredNorm();
  };
  const auto r = minimise_box(f, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Constant(3, -1.0),
                              Eigen::VectorXd::Constant(3, 1.0));
  CHECK(r.converged);
  CHECK((r.x - c).norm() < 1e-6);
  CHECK(r.improved());
  CHECK(r.initial_value == doctest::Approx(c.squaredNorm()));
}

TEST_CASE("active bounds are respected exactly") {
  Eigen::VectorXd c(2);
  c << 3.0, -4.0;
  const ObjectiveFn f = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    if (g) *g = 2.0 * (x - c);
    return (x - c).squaredNorm();
  };
  const auto r = minimise_box(f, Eigen::VectorXd::Constant(2, 0.5), Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2));
  CHECK(r.x(0) == 1.0);
  CHECK(r.x(1) == 0.0);
  CHECK(r.converged);
}

TEST_CASE("Rosenbrock inside a box") {
  const ObjectiveFn f = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    const double a = 1.0 - x(0), b = x(1) - x(0) * x(0);
    if (g) {
      (*g)(0) = -2.0 * a - 400.0 * x(0) * b;
      (*g)(1) = 200.0 * b;
    }
    return a * a + 100.0 * b * b;
  };
  BoxMinimiserOptions opt;
  opt.max_iterations = 2000;
  const auto r = minimise_box(f, Eigen::VectorXd::Constant(2, -1.2), Eigen::VectorXd::Constant(2, -2.0),
                              Eigen::VectorXd::Constant(2, 2.0), opt);
  CHECK(r.value < 1e-8);
  CHECK(std::abs(r.x(0) - 1.0) < 1e-3);
}

TEST_CASE("non-finite values reject a step without corrupting the search") {
  // f is +inf for x > 0.5; the minimiser must stay on the finite side.
  const ObjectiveFn f = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    if (x(0) > 0.5) return std::numeric_limits<double>::infinity();
    if (g) (*g)(0) = -1.0;
    return -x(0);
  };
  const auto r = minimise_box(f, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, -1.0),
                              Eigen::VectorXd::Constant(1, 1.0));
  CHECK(std::isfinite(r.value));
  CHECK(r.x(0) <= 0.5);
  CHECK(r.value <= 0.0);
}

TEST_CASE("a start at the minimum does not claim improvement") {
  const ObjectiveFn f = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    if (g) *g = 2.0 * x;
    return x.squaredNorm();
  };
  const auto r = minimise_box(f, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Constant(2, -1.0),
                              Eigen::VectorXd::Constant(2, 1.0));
  CHECK(r.converged);
  CHECK_FALSE(r.improved());
  CHECK(r.value == 0.0);
}
