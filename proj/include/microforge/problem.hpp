#pragma once

// Closed-loop black box: latent -> generator -> properties -> objective.

#include <cstdint>
#include <optional>
#include <vector>

#include "microforge/bo.hpp"
#include "microforge/genlat.hpp"
#include "microforge/objectives.hpp"
#include "microforge/props.hpp"

namespace microforge {

/// `count` latents: z itself followed by count - 1 points drawn uniformly
/// from the ball of radius `radius` around z, clipped to the latent bounds.
std::vector<LatentVector> latent_ball_samples(const LatentVector& z, int count, double radius, std::uint64_t seed);

/// Seed for the perturbation batch of z; depends only on z's bits.
std::uint64_t latent_seed(const LatentVector& z);

class MicrostructureProblem final : public BlackBox {
 public:
  MicrostructureProblem(MicrostructureSource& source, ObjectiveSpec objective, SolverConfig solver);

  /// Freezes the normalisation statistics from the design (unless the spec
  /// already carries them), then scores every design point.
  std::vector<Outcome> evaluate_design(const std::vector<LatentVector>& design) override;
  Outcome evaluate(const LatentVector& z) override;

  const ObjectiveSpec& objective() const noexcept { return objective_; }
  const SolverConfig& solver() const noexcept { return solver_; }

 private:
  struct Sample {
    std::vector<PropertyReport> reports;
    std::vector<Microstructure> volumes;  // kept only for volume-based objectives
    std::string error;
  };

  Sample sample(const LatentVector& z);
  Outcome score(Sample& s) const;

  MicrostructureSource* source_;
  ObjectiveSpec objective_;
  SolverConfig solver_;
};

}  // namespace microforge
