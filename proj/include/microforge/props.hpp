#pragma once

// Morphological and transport properties of a three-phase microstructure.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "microforge/voxel.hpp"

namespace microforge {

struct SolverConfig {
  int max_iterations = 20000;
  /// Bound on the relative inlet/outlet flux imbalance and on the relative
  /// flux change between checkpoints.
  double tolerance = 1e-4;
  double over_relaxation = 1.9;
  int check_interval = 100;
  /// Axes solved concurrently in evaluate_all; results do not depend on it.
  int threads = 1;

  void validate() const;
};

struct DiffusionResult {
  double relative_diffusivity = 0.0;
  double tortuosity = 0.0;  // +inf when not percolating
  bool percolating = false;
  bool converged = false;
  int iterations = 0;
  double flux_in = 0.0;
  double flux_out = 0.0;
  /// Final |flux_in - flux_out| / flux_in.
  double residual = 0.0;
};

/// NMC/pore interfacial area per total volume (1/um), by face counting.
double ssa_nmc(const Microstructure& m);

/// Steady diffusion through `phase` between the two faces normal to `axis`
/// (C = 1 at the inlet face, 0 at the outlet face, no flux elsewhere).
/// Intrinsic diffusivity is 1, so the result is dimensionless.
DiffusionResult relative_diffusivity(const Microstructure& m, Phase phase, Axis axis, const SolverConfig& cfg = {});

struct Particle {
  std::size_t voxels = 0;
  double volume = 0.0;             // um^3
  double surface_area = 0.0;       // um^2, exposed faces incl. domain boundary
  double equivalent_diameter = 0.0;
  double sphericity = 0.0;
  bool touches_boundary = false;
};

struct ParticleMetrics {
  std::vector<Particle> particles;
  /// Volume-weighted means; absent when the phase is empty.
  std::optional<double> equivalent_diameter_mean;
  std::optional<double> sphericity_mean;
};

ParticleMetrics particle_metrics(const Microstructure& m, Phase phase);

struct AxisTransport {
  double relative_diffusivity = 0.0;
  double tortuosity = 0.0;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
};

struct PropertyReport {
  PhaseFractions fractions;
  double ssa_nmc = 0.0;
  std::array<AxisTransport, 3> pore_transport{};
  std::size_t nmc_particle_count = 0;
  std::optional<double> nmc_equivalent_diameter_mean;
  std::optional<double> nmc_sphericity_mean;

  double drel(Axis a) const noexcept { return pore_transport[static_cast<std::size_t>(code(a))].relative_diffusivity; }
  double tau(Axis a) const noexcept { return pore_transport[static_cast<std::size_t>(code(a))].tortuosity; }
  /// Mean of the three directional relative diffusivities.
  double drel_mean() const noexcept;
  /// Mean tortuosity over axes; +inf if any axis is blocked.
  double tau_mean() const noexcept;
  bool converged() const noexcept;
};

PropertyReport evaluate_all(const Microstructure& m, const SolverConfig& cfg = {});

/// Fixed CSV column order for PropertyReport records.
const std::vector<std::string>& property_columns();
std::vector<std::string> property_fields(const PropertyReport& r);
PropertyReport parse_property_fields(const std::vector<std::string>& fields);

}  // namespace microforge
