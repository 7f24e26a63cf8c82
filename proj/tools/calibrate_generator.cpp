// Tunes the procedural generator's phase offsets so that latents drawn from
// N(0, 1) give prescribed mean volume fractions.
//
//   microforge_calibrate [--samples 50] [--size 64] [--rounds 12] [--seed 2024]

#include <array>
#include <iostream>
#include <vector>

#include <CLI11.hpp>

#include "microforge/genlat.hpp"
#include "microforge/rng.hpp"
#include "microforge/text.hpp"

namespace {

using namespace microforge;

std::array<double, 3> mean_fractions(const GeneratorConfig& cfg, const std::vector<LatentVector>& zs) {
  ProceduralGenerator gen(cfg);
  std::array<double, 3> acc{};
  for (const auto& z : zs) {
    const auto phi = volume_fractions(gen.generate(z));
    for (Phase p : kAllPhases) acc[static_cast<std::size_t>(code(p))] += phi[p];
  }
  for (auto& a : acc) a /= static_cast<double>(zs.size());
  return acc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Calibrate generator phase offsets", "microforge_calibrate"};
  int samples = 50, size = 64, rounds = 12;
  std::uint64_t seed = 2024;
  std::array<double, 3> target{0.40, 0.45, 0.15};
  app.add_option("--samples", samples);
  app.add_option("--size", size);
  app.add_option("--rounds", rounds);
  app.add_option("--seed", seed);
  CLI11_PARSE(app, argc, argv);

  GeneratorConfig cfg;
  cfg.output_dims = {size, size, size};
  const std::size_t L = cfg.latent_size();
  Rng rng(seed);
  std::vector<LatentVector> zs;
  for (int i = 0; i < samples; ++i) {
    std::vector<double> v(L);
    for (auto& x : v) x = rng.normal();
    zs.emplace_back(std::move(v));
  }

  // Pore is the reference channel; the other offsets move their phase's
  // fraction monotonically, so a damped secant-free update converges.
  for (int round = 0; round < rounds; ++round) {
    const auto phi = mean_fractions(cfg, zs);
    std::cout << "round " << round << ": offsets nmc=" << text::format_double(cfg.channel(Phase::NMC).offset)
              << " cbd=" << text::format_double(cfg.channel(Phase::CBD).offset) << " -> phi pore="
              << phi[0] << " nmc=" << phi[1] << " cbd=" << phi[2] << '\n';
    cfg.channel(Phase::NMC).offset += 1.5 * (target[1] - phi[1]) - 0.5 * (target[0] - phi[0]);
    cfg.channel(Phase::CBD).offset += 1.5 * (target[2] - phi[2]) - 0.5 * (target[0] - phi[0]);
  }
  const auto phi = mean_fractions(cfg, zs);
  std::cout << "final offsets nmc=" << text::format_double(cfg.channel(Phase::NMC).offset)
            << " cbd=" << text::format_double(cfg.channel(Phase::CBD).offset) << " phi pore=" << phi[0]
            << " nmc=" << phi[1] << " cbd=" << phi[2] << '\n';
  return 0;
}
