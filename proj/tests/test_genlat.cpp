#include <doctest.h>

#include <cmath>
#include <numeric>

#include "microforge/genlat.hpp"
#include "microforge/rng.hpp"

using namespace microforge;

namespace {

LatentVector normal_latent(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return LatentVector(std::move(v));
}

std::size_t differing_voxels(const Microstructure& a, const Microstructure& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += a.labels()[i] != b.labels()[i];
  return n;
}

GeneratorConfig small_config() {
  GeneratorConfig cfg;
  cfg.output_dims = {32, 32, 32};
  return cfg;
}

}  // namespace

TEST_CASE("latent vectors are clamped to the bounds") {
  const LatentVector z({-7.0, -5.0, 0.5, 5.0, 12.0});
  CHECK(z.size() == 5);
  CHECK(z[0] == -5.0);
  CHECK(z[1] == -5.0);
  CHECK(z[2] == 0.5);
  CHECK(z[4] == 5.0);
  CHECK(z.clamped_count() == 2);
  CHECK_THROWS(LatentVector({0.0, std::nan("")}));
}

TEST_CASE("latent grid follows the x16 upsampling") {
  GeneratorConfig cfg;
  CHECK(cfg.latent_dims() == Dims{4, 4, 4});
  CHECK(cfg.latent_size() == 64);
  cfg.output_dims = {128, 128, 128};
  CHECK(cfg.latent_size() == 512);
  cfg.output_dims = {32, 16, 48};
  CHECK(cfg.latent_dims() == Dims{2, 1, 3});
  cfg.output_dims = {40, 32, 32};
  CHECK_THROWS(cfg.latent_dims());
}

TEST_CASE("generation is deterministic") {
  const GeneratorConfig cfg;
  const LatentVector zero(std::vector<double>(64, 0.0));
  const auto v0 = generate(zero, cfg);
  CHECK(v0.dims() == Dims{64, 64, 64});
  CHECK(generate(zero, cfg) == v0);
  ProceduralGenerator gen(cfg);
  CHECK(gen.generate(zero) == v0);
  CHECK(gen.generate(zero) == v0);
  for (Phase p : v0.labels()) CHECK_FALSE(code(p) > 2);
}

TEST_CASE("latent length must match the output grid") {
  ProceduralGenerator gen(small_config());
  CHECK_THROWS_AS(gen.generate(LatentVector(std::vector<double>(64, 0.0))), std::invalid_argument);
  CHECK_NOTHROW(gen.generate(LatentVector(std::vector<double>(8, 0.0))));
}

TEST_CASE("a different basis seed gives a different volume") {
  GeneratorConfig a = small_config();
  GeneratorConfig b = a;
  b.seed = a.seed + 1;
  const LatentVector z(std::vector<double>(8, 0.0));
  CHECK(differing_voxels(generate(z, a), generate(z, b)) > 1000);
}

TEST_CASE("tiny latent changes flip only near-tie voxels") {
  ProceduralGenerator gen(GeneratorConfig{});
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const LatentVector z = normal_latent(rng, 64);
    std::vector<double> moved(z.values().begin(), z.values().end());
    moved[static_cast<std::size_t>(trial * 13)] += 1e-9;
    CHECK(differing_voxels(gen.generate(z), gen.generate(LatentVector(moved))) <= 5);
  }
}

TEST_CASE("volume fractions are continuous in z") {
  ProceduralGenerator gen(GeneratorConfig{});
  Rng rng(11);
  for (int pair = 0; pair < 20; ++pair) {
    const LatentVector z = normal_latent(rng, 64);
    std::vector<double> moved(z.values().begin(), z.values().end());
    moved[rng.below(64)] += 1e-3;
    const auto a = volume_fractions(gen.generate(z));
    const auto b = volume_fractions(gen.generate(LatentVector(moved)));
    for (Phase p : kAllPhases) CHECK(std::abs(a[p] - b[p]) <= 0.02);
  }
}

TEST_CASE("default coefficients hit the calibration targets at 64^3") {
  ProceduralGenerator gen(GeneratorConfig{});
  Rng rng(2024);
  std::array<double, 3> mean{};
  const int n = 50;
  for (int i = 0; i < n; ++i) {
    const auto phi = volume_fractions(gen.generate(normal_latent(rng, 64)));
    for (Phase p : kAllPhases) mean[static_cast<std::size_t>(code(p))] += phi[p] / n;
  }
  CHECK(std::abs(mean[0] - 0.40) <= 0.05);
  CHECK(std::abs(mean[1] - 0.45) <= 0.05);
  CHECK(std::abs(mean[2] - 0.15) <= 0.05);
}

TEST_CASE("the same coefficients carry over to 128^3") {
  GeneratorConfig cfg;
  cfg.output_dims = {128, 128, 128};
  ProceduralGenerator gen(cfg);
  Rng rng(77);
  std::array<double, 3> mean{};
  const int n = 12;
  for (int i = 0; i < n; ++i) {
    const auto phi = volume_fractions(gen.generate(normal_latent(rng, 512)));
    for (Phase p : kAllPhases) mean[static_cast<std::size_t>(code(p))] += phi[p] / n;
  }
  CHECK(std::abs(mean[0] - 0.40) <= 0.05);
  CHECK(std::abs(mean[1] - 0.45) <= 0.05);
  CHECK(std::abs(mean[2] - 0.15) <= 0.05);
}

TEST_CASE("random fields agree on shared global coordinates") {
  const auto big = gaussian_random_field(Dims{24, 20, 16}, {0, 0, 0}, 3.0, 42, 1);
  const auto small = gaussian_random_field(Dims{8, 6, 5}, {10, 7, 4}, 3.0, 42, 1);
  for (int z = 0; z < 5; ++z)
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 8; ++x) {
        const double s = small[static_cast<std::size_t>((z * 6 + y) * 8 + x)];
        const double b = big[static_cast<std::size_t>(((z + 4) * 20 + (y + 7)) * 24 + (x + 10))];
        CHECK(s == b);
      }
  const auto other_stream = gaussian_random_field(Dims{8, 6, 5}, {10, 7, 4}, 3.0, 42, 2);
  CHECK(other_stream != small);
}

TEST_CASE("generated volumes of different sizes share their basis fields") {
  GeneratorConfig a;
  GeneratorConfig b;
  b.output_dims = {128, 128, 128};
  const ProceduralGenerator ga(a);
  const ProceduralGenerator gb(b);
  for (Phase p : kAllPhases) {
    const auto fa = ga.basis_field(p);
    const auto fb = gb.basis_field(p);
    for (int z = 0; z < 64; z += 7)
      for (int y = 0; y < 64; y += 5)
        for (int x = 0; x < 64; x += 3) {
          CHECK(fa[static_cast<std::size_t>((z * 64 + y) * 64 + x)] ==
                fb[static_cast<std::size_t>((z * 128 + y) * 128 + x)]);
        }
  }
}

TEST_CASE("basis fields are roughly zero-mean with unit variance") {
  GeneratorConfig cfg;
  cfg.output_dims = {128, 128, 128};
  const ProceduralGenerator gen(cfg);
  for (Phase p : kAllPhases) {
    const auto f = gen.basis_field(p);
    const double n = static_cast<double>(f.size());
    const double mean = std::accumulate(f.begin(), f.end(), 0.0) / n;
    double var = 0.0;
    for (double v : f) var += (v - mean) * (v - mean) / n;
    CHECK(std::abs(mean) < 0.25);
    CHECK(var > 0.7);
    CHECK(var < 1.3);
  }
}

TEST_CASE("the latent field is a smooth upsampling of z") {
  const ProceduralGenerator gen(small_config());
  const auto constant = gen.latent_field(LatentVector(std::vector<double>(8, 1.5)));
  CHECK(constant.size() == 32u * 32u * 32u);
  for (double v : constant) CHECK(v == doctest::Approx(1.5).epsilon(1e-12));
  std::vector<double> ramp(8);
  for (int i = 0; i < 8; ++i) ramp[static_cast<std::size_t>(i)] = (i & 1) ? 1.0 : -1.0;
  const auto f = gen.latent_field(LatentVector(ramp));
  // Odd x cells are +1, even x cells -1: the field rises along x.
  CHECK(f[0] < f[31]);
  for (int x = 1; x < 32; ++x) CHECK(f[static_cast<std::size_t>(x)] >= f[static_cast<std::size_t>(x - 1)] - 1e-12);
}

TEST_CASE("latent weight moves the NMC and CBD fractions in opposite directions") {
  ProceduralGenerator gen(GeneratorConfig{});
  const auto lo = volume_fractions(gen.generate(LatentVector(std::vector<double>(64, -1.0))));
  const auto hi = volume_fractions(gen.generate(LatentVector(std::vector<double>(64, 1.0))));
  CHECK(hi[Phase::NMC] > lo[Phase::NMC]);
  CHECK(hi[Phase::CBD] < lo[Phase::CBD]);
}
