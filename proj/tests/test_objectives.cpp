#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "microforge/objectives.hpp"
#include "microforge/problem.hpp"
#include "microforge/rng.hpp"
#include "support.hpp"

using namespace microforge;
using microforge::test::make_volume;

namespace {

PropertyReport report(double ssa, std::array<double, 3> drel, std::array<double, 3> phi = {0.4, 0.45, 0.15}) {
  PropertyReport r;
  r.ssa_nmc = ssa;
  for (std::size_t a = 0; a < 3; ++a) {
    r.pore_transport[a].relative_diffusivity = drel[a];
    r.pore_transport[a].converged = true;
  }
  r.fractions.values = phi;
  return r;
}

NormalisationStats stats() {
  NormalisationStats n;
  n.ssa_range = 2.0;
  n.drel_range = 0.5;
  n.phi_range = {0.4, 0.5, 0.2};
  n.phi_mean = {0.4, 0.45, 0.15};
  n.drel_axis_mean = {0.3, 0.2, 0.25};
  return n;
}

ObjectiveSpec spec(ObjectiveKind kind) {
  ObjectiveSpec s;
  s.kind = kind;
  s.normalisation = stats();
  return s;
}

}  // namespace

TEST_CASE("objective names round trip") {
  for (auto k : {ObjectiveKind::Ssa, ObjectiveKind::Drel, ObjectiveKind::DrelAxis, ObjectiveKind::WeightedSsaDrel,
                 ObjectiveKind::SsaConstVf, ObjectiveKind::DrelConstPorosity, ObjectiveKind::DrelAxisConstOthers,
                 ObjectiveKind::GradedProfile}) {
    CHECK(parse_objective(objective_name(k)) == k);
  }
  CHECK_THROWS(parse_objective("porosity"));
}

TEST_CASE("spec validation") {
  ObjectiveSpec s;
  s.gamma = 0.25;
  CHECK(s.beta() == 0.75);
  CHECK_NOTHROW(s.validate());
  s.gamma = 1.5;
  CHECK_THROWS(s.validate());
  s.gamma = 0.5;
  s.batch_size = 0;
  CHECK_THROWS(s.validate());
  s.batch_size = 1;
  s.normalisation = stats();
  s.normalisation->ssa_range = 0.0;
  CHECK_THROWS(s.validate());
}

TEST_CASE("rmse and linspace") {
  const std::vector<double> v{1.0, 3.0};
  CHECK(rmse(v, 2.0) == 1.0);
  const std::vector<double> a{0.0, 0.0, 0.0}, b{1.0, -1.0, 1.0};
  CHECK(rmse(a, b) == 1.0);
  CHECK_THROWS(rmse(std::span<const double>{}, 0.0));
  CHECK(linspace(0.2, 0.6, 1) == std::vector<double>{0.2});
  const auto l = linspace(0.0, 1.0, 5);
  CHECK(l == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
}

TEST_CASE("surface area objective") {
  CHECK(eval_ssa(report(0.125, {0, 0, 0})) == 0.125);
  const auto all_nmc = make_volume({8, 8, 8}, [](int, int, int) { return Phase::NMC; });
  CHECK(eval_ssa(evaluate_all(all_nmc)) == 0.0);
  const auto mixed = make_volume({8, 8, 8}, [](int x, int y, int) { return (x + y) % 3 == 0 ? Phase::Pore : Phase::NMC; });
  CHECK(eval_ssa(evaluate_all(mixed)) == ssa_nmc(mixed));
}

TEST_CASE("diffusivity objectives") {
  CHECK(eval_drel(report(0, {1, 1, 1})) == 1.0);
  const auto r = report(0, {0.0, 0.4, 0.4});
  CHECK(eval_drel(r) == doctest::Approx(0.2667).epsilon(1e-3));
  CHECK(eval_drel_axis(r, Axis::X) == 0.0);
  CHECK(eval_drel_axis(r, Axis::Y) == 0.4);
  // Straight channel of width 3 in an 8x8 cross section: tau = 1, so D = phi.
  const auto channel =
      make_volume({16, 8, 8}, [](int, int y, int z) { return y < 3 && z < 8 ? Phase::Pore : Phase::NMC; });
  const auto rep = evaluate_all(channel);
  CHECK(eval_drel_axis(rep, Axis::X) == doctest::Approx(rep.fractions[Phase::Pore]).epsilon(1e-3));
}

TEST_CASE("weighted objective") {
  auto s = spec(ObjectiveKind::WeightedSsaDrel);
  // D_rel,norm = 0.1 / 0.5 = 0.2 and SSA,norm = 1.2 / 2 = 0.6.
  const auto r = report(1.2, {0.1, 0.1, 0.1});
  s.gamma = 0.0;
  CHECK(eval_weighted(r, s) == doctest::Approx(0.2).epsilon(1e-15));
  s.gamma = 1.0;
  CHECK(eval_weighted(r, s) == doctest::Approx(0.6).epsilon(1e-15));
  s.gamma = 0.5;
  CHECK(eval_weighted(r, s) == doctest::Approx(0.4).epsilon(1e-15));
  const PropertyReport batch[] = {r};
  CHECK(evaluate_objective(s, batch, {}) == eval_weighted(r, s));
}

TEST_CASE("weighted objective is linear with unit coefficient sum") {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    auto s = spec(ObjectiveKind::WeightedSsaDrel);
    s.gamma = rng.uniform();
    const double dn = rng.uniform(), sn = rng.uniform();
    const auto r = report(sn * s.normalisation->ssa_range, {0, 0, 0});
    auto r2 = r;
    for (auto& t2 : r2.pore_transport) t2.relative_diffusivity = dn * s.normalisation->drel_range;
    CHECK(eval_weighted(r2, s) == doctest::Approx(s.beta() * dn + s.gamma * sn).epsilon(1e-13));
    // Equal inputs give the input back: the coefficients sum to one.
    auto r3 = report(0.37 * s.normalisation->ssa_range, {0, 0, 0});
    for (auto& t3 : r3.pore_transport) t3.relative_diffusivity = 0.37 * s.normalisation->drel_range;
    CHECK(eval_weighted(r3, s) == doctest::Approx(0.37).epsilon(1e-13));
  }
}

TEST_CASE("common range rescaling preserves the ordering of reports") {
  Rng rng(2);
  auto s = spec(ObjectiveKind::WeightedSsaDrel);
  auto scaled = s;
  scaled.normalisation->ssa_range *= 3.7;
  scaled.normalisation->drel_range *= 3.7;
  for (int t = 0; t < 100; ++t) {
    const double d1 = rng.uniform(), d2 = rng.uniform();
    const auto a = report(rng.uniform(), {d1, d1, d1});
    const auto b = report(rng.uniform(), {d2, d2, d2});
    CHECK((eval_weighted(a, s) < eval_weighted(b, s)) == (eval_weighted(a, scaled) < eval_weighted(b, scaled)));
    CHECK(eval_weighted(a, scaled) == doctest::Approx(eval_weighted(a, s) / 3.7).epsilon(1e-13));
  }
}

TEST_CASE("constant volume fraction penalty") {
  const auto s = spec(ObjectiveKind::SsaConstVf);
  const auto n = stats();
  // All at the mean: no penalty.
  const std::vector<PropertyReport> at_mean{report(1.0, {0, 0, 0}), report(1.4, {0, 0, 0})};
  CHECK(eval_constrained_vf(at_mean, s) == doctest::Approx(1.2 / n.ssa_range).epsilon(1e-15));
  // N = 1, phi = mean + 0.1, range 0.5: penalty 0.2.
  const std::vector<PropertyReport> off{report(1.0, {0, 0, 0}, {0.35, 0.55, 0.10})};
  CHECK(eval_constrained_vf(off, s) == doctest::Approx(0.5 - 0.2).epsilon(1e-14));
  // Permutation invariance.
  std::vector<PropertyReport> batch{report(1.0, {0, 0, 0}, {0.3, 0.5, 0.2}), report(2.0, {0, 0, 0}, {0.4, 0.4, 0.2}),
                                    report(0.5, {0, 0, 0}, {0.5, 0.3, 0.2})};
  const double v = eval_constrained_vf(batch, s);
  std::reverse(batch.begin(), batch.end());
  CHECK(eval_constrained_vf(batch, s) == doctest::Approx(v).epsilon(1e-15));
  std::rotate(batch.begin(), batch.begin() + 1, batch.end());
  CHECK(eval_constrained_vf(batch, s) == doctest::Approx(v).epsilon(1e-15));
}

TEST_CASE("constant porosity penalty") {
  const auto s = spec(ObjectiveKind::DrelConstPorosity);
  const auto n = stats();
  const std::vector<PropertyReport> at_mean{report(0, {0.2, 0.2, 0.2}), report(0, {0.3, 0.3, 0.3})};
  CHECK(eval_constrained_porosity(at_mean, s) == doctest::Approx(0.25 / n.drel_range).epsilon(1e-14));
  // N = 1, phi_pore = mean + 0.1 with range 0.4: penalty 0.25.
  const std::vector<PropertyReport> off{report(0, {0.2, 0.2, 0.2}, {0.5, 0.35, 0.15})};
  CHECK(eval_constrained_porosity(off, s) == doctest::Approx(0.4 - 0.25).epsilon(1e-14));
  std::vector<PropertyReport> batch{report(0, {0.1, 0.2, 0.3}, {0.3, 0.5, 0.2}),
                                    report(0, {0.2, 0.2, 0.2}, {0.6, 0.2, 0.2})};
  const double v = eval_constrained_porosity(batch, s);
  std::swap(batch[0], batch[1]);
  CHECK(eval_constrained_porosity(batch, s) == doctest::Approx(v).epsilon(1e-15));
}

TEST_CASE("directional diffusivity with penalties on the other axes") {
  auto s = spec(ObjectiveKind::DrelAxisConstOthers);
  s.axis = Axis::X;
  const auto n = stats();
  const std::vector<PropertyReport> at_mean{report(0, {0.5, n.drel_axis_mean[1], n.drel_axis_mean[2]})};
  CHECK(eval_drel_axis_constrained(at_mean, s) == 0.5);
  // Symmetric deviations +-d equal a uniform deviation d.
  const double d = 0.05;
  const std::vector<PropertyReport> sym{report(0, {0.5, 0.2 + d, 0.25}), report(0, {0.5, 0.2 - d, 0.25})};
  const std::vector<PropertyReport> uni{report(0, {0.5, 0.2 + d, 0.25}), report(0, {0.5, 0.2 + d, 0.25})};
  CHECK(eval_drel_axis_constrained(sym, s) == doctest::Approx(eval_drel_axis_constrained(uni, s)).epsilon(1e-14));
  CHECK(eval_drel_axis_constrained(sym, s) == doctest::Approx(0.5 - d).epsilon(1e-14));
  // Monotone in the target axis.
  double prev = -1e300;
  for (double x = 0.0; x <= 1.0; x += 0.1) {
    const std::vector<PropertyReport> b{report(0, {x, 0.31, 0.12})};
    const double v = eval_drel_axis_constrained(b, s);
    CHECK(v > prev);
    prev = v;
  }
  // The penalised axis follows spec.axis.
  s.axis = Axis::Y;
  const std::vector<PropertyReport> y_mean{report(0, {n.drel_axis_mean[0], 0.7, n.drel_axis_mean[2]})};
  CHECK(eval_drel_axis_constrained(y_mean, s) == 0.7);
}

TEST_CASE("penalties are non-negative and vanish at zero deviation") {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    std::vector<PropertyReport> batch;
    const int nb = 1 + static_cast<int>(rng.uniform() * 5);
    for (int k = 0; k < nb; ++k) {
      const double p = rng.uniform(0.2, 0.6);
      batch.push_back(report(rng.uniform(), {rng.uniform(), rng.uniform(), rng.uniform()}, {p, 0.8 - p, 0.2}));
    }
    const auto vf = spec(ObjectiveKind::SsaConstVf);
    const auto po = spec(ObjectiveKind::DrelConstPorosity);
    const auto ax = spec(ObjectiveKind::DrelAxisConstOthers);
    double ssa = 0.0, drel = 0.0, dx = 0.0;
    for (const auto& r : batch) {
      ssa += r.ssa_nmc / nb;
      drel += r.drel_mean() / nb;
      dx += r.drel(Axis::X) / nb;
    }
    CHECK(eval_constrained_vf(batch, vf) <= ssa / vf.normalisation->ssa_range + 1e-15);
    CHECK(eval_constrained_porosity(batch, po) <= drel / po.normalisation->drel_range + 1e-15);
    CHECK(eval_drel_axis_constrained(batch, ax) <= dx + 1e-15);
  }
}

TEST_CASE("graded profile objective") {
  ObjectiveSpec s;
  s.kind = ObjectiveKind::GradedProfile;
  s.graded = GradedTarget{Phase::Pore, Axis::X, 0.2, 0.6};
  const Dims d{64, 5, 1};
  // Five voxels per slice, so slice fractions are multiples of 0.2.
  SUBCASE("profile equal to target") {
    ObjectiveSpec t = s;
    t.graded = GradedTarget{Phase::Pore, Axis::X, 0.2, 0.2};
    const auto m = make_volume(d, [](int, int y, int) { return y == 0 ? Phase::Pore : Phase::NMC; });
    CHECK(eval_graded(m, t) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  }
  SUBCASE("uniform profile at the midpoint of a linear target") {
    const auto m = make_volume(d, [](int, int y, int) { return y < 2 ? Phase::Pore : Phase::NMC; });
    // Sum_j (j/(m-1) - 1/2)^2 = m (m+1) / (12 (m-1)), so the RMSE is
    // |b - a| sqrt((m+1) / (12 (m-1))).
    const double expected = -0.4 * std::sqrt(65.0 / (12.0 * 63.0));
    CHECK(eval_graded(m, s) == doctest::Approx(expected).epsilon(1e-13));
    const Microstructure vols[] = {m, m};
    CHECK(evaluate_objective(s, {}, vols) == doctest::Approx(expected).epsilon(1e-13));
    CHECK_THROWS(evaluate_objective(s, {}, {}));
  }
  SUBCASE("slice order matters") {
    const auto ramp = make_volume(d, [](int x, int y, int) { return y < 1 + x / 16 ? Phase::Pore : Phase::NMC; });
    const auto reversed =
        make_volume(d, [](int x, int y, int) { return y < 1 + (63 - x) / 16 ? Phase::Pore : Phase::NMC; });
    CHECK(eval_graded(ramp, s) > eval_graded(reversed, s));
    ObjectiveSpec flat = s;
    flat.graded.end = flat.graded.start;
    CHECK(eval_graded(ramp, flat) == doctest::Approx(eval_graded(reversed, flat)).epsilon(1e-14));
  }
  CHECK(graded_target(s.graded, d).size() == 64);
}

TEST_CASE("objectives that need ranges refuse to run without them") {
  ObjectiveSpec s;
  s.kind = ObjectiveKind::SsaConstVf;
  const PropertyReport r[] = {report(1, {0, 0, 0})};
  CHECK_THROWS_AS(evaluate_objective(s, r, {}), std::logic_error);
  CHECK(needs_normalisation(ObjectiveKind::WeightedSsaDrel));
  CHECK_FALSE(needs_normalisation(ObjectiveKind::Ssa));
  CHECK(needs_transport(ObjectiveKind::DrelAxisConstOthers));
  CHECK_FALSE(needs_transport(ObjectiveKind::SsaConstVf));
  CHECK(needs_volume(ObjectiveKind::GradedProfile));
}

TEST_CASE("normalisation statistics from a design") {
  const std::vector<PropertyReport> reps{report(1.0, {0.1, 0.2, 0.3}, {0.3, 0.5, 0.2}),
                                         report(3.0, {0.4, 0.2, 0.3}, {0.5, 0.3, 0.2})};
  const auto n = NormalisationStats::from_reports(reps);
  CHECK(n.ssa_range == 2.0);
  CHECK(n.drel_range == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(n.phi_range[0] == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(n.phi_range[2] == 1.0);  // zero spread falls back to 1
  CHECK(n.phi_mean[1] == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(n.drel_axis_mean[0] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK_THROWS(NormalisationStats::from_reports({}));
}

// ---------------------------------------------------------------------------
// Perturbation batches and the closed-loop problem.

TEST_CASE("ball samples stay within the radius and the bounds") {
  Rng rng(4);
  std::vector<double> v(8);
  for (auto& x : v) x = rng.uniform(-5.0, 5.0);
  v[0] = 4.99;
  const LatentVector z(v);
  const auto batch = latent_ball_samples(z, 30, 0.1, 9);
  REQUIRE(batch.size() == 30);
  CHECK(batch[0] == z);
  for (const auto& b : batch) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
      CHECK(b[i] >= -5.0);
      CHECK(b[i] <= 5.0);
      d2 += (b[i] - z[i]) * (b[i] - z[i]);
    }
    CHECK(std::sqrt(d2) <= 0.1 + 1e-12);
  }
  CHECK(latent_ball_samples(z, 30, 0.1, 9) == batch);
  for (const auto& b : latent_ball_samples(z, 30, 0.0, 9)) CHECK(b == z);
  CHECK_THROWS(latent_ball_samples(z, 0, 0.1, 9));
}

TEST_CASE("latent seed depends on the exact bits of z") {
  const LatentVector a(std::vector<double>{0.5, -1.0});
  const LatentVector b(std::vector<double>{0.5, std::nextafter(-1.0, 0.0)});
  CHECK(latent_seed(a) == latent_seed(LatentVector(std::vector<double>{0.5, -1.0})));
  CHECK(latent_seed(a) != latent_seed(b));
}

TEST_CASE("closed-loop problem freezes its normalisation from the design") {
  GeneratorConfig cfg;
  cfg.output_dims = {16, 16, 16};
  ProceduralGenerator gen(cfg);
  ObjectiveSpec s;
  s.kind = ObjectiveKind::SsaConstVf;
  MicrostructureProblem problem(gen, s, SolverConfig{});
  const LatentVector probe(std::vector<double>{0.7});
  CHECK_THROWS_AS(problem.evaluate(probe), std::logic_error);

  std::vector<LatentVector> design;
  for (double v : {-2.0, -0.5, 0.0, 1.0, 2.5}) design.emplace_back(std::vector<double>{v});
  const auto out = problem.evaluate_design(design);
  REQUIRE(out.size() == 5);
  for (const auto& o : out) CHECK(o.ok);
  REQUIRE(problem.objective().normalisation.has_value());
  const auto frozen = *problem.objective().normalisation;

  const auto first = problem.evaluate(probe);
  for (double v : {-4.0, 3.0, 4.5}) problem.evaluate(LatentVector(std::vector<double>{v}));
  const auto again = problem.evaluate(probe);
  CHECK(first.value == again.value);
  CHECK(problem.objective().normalisation->ssa_range == frozen.ssa_range);
  CHECK(problem.objective().normalisation->phi_mean == frozen.phi_mean);

  // Scoring the probe report directly reproduces the problem's value.
  REQUIRE(first.report.has_value());
  const PropertyReport batch[] = {*first.report};
  CHECK(evaluate_objective(problem.objective(), batch, {}) == first.value);
}

TEST_CASE("closed-loop problem reports properties and honours the batch size") {
  GeneratorConfig cfg;
  cfg.output_dims = {16, 16, 16};
  ProceduralGenerator gen(cfg);
  ObjectiveSpec s;
  s.kind = ObjectiveKind::Ssa;
  s.batch_size = 4;
  s.batch_radius = 0.0;
  MicrostructureProblem problem(gen, s, SolverConfig{});
  const LatentVector z(std::vector<double>{0.3});
  const auto o = problem.evaluate(z);
  REQUIRE(o.ok);
  // A zero radius batch is four copies of z, so the mean equals one sample.
  CHECK(o.value == doctest::Approx(ssa_nmc(gen.generate(z))).epsilon(1e-15));
  CHECK(o.report->ssa_nmc == o.value);
}
