#pragma once

// Scalar objectives over property reports. Every objective is a
// maximisation target.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "microforge/props.hpp"
#include "microforge/voxel.hpp"

namespace microforge {

enum class ObjectiveKind {
  Ssa,                  // SSA
  Drel,                 // mean D_rel over the three axes
  DrelAxis,             // D_rel along one axis
  WeightedSsaDrel,      // beta D_rel/range + gamma SSA/range
  SsaConstVf,           // SSA/range - RMSE(phi_NMC)/range
  DrelConstPorosity,    // D_rel/range - RMSE(phi_pore)/range
  DrelAxisConstOthers,  // D_rel,axis - RMSE on the two other axes
  GradedProfile,        // -RMSE(slice profile, linear target)
};

std::string_view objective_name(ObjectiveKind k) noexcept;
ObjectiveKind parse_objective(std::string_view name);

/// Statistics of the initial design used to normalise and penalise.
struct NormalisationStats {
  double ssa_range = 1.0;
  double drel_range = 1.0;                  // of the axis-mean D_rel
  std::array<double, kPhaseCount> phi_range{1.0, 1.0, 1.0};
  std::array<double, kPhaseCount> phi_mean{};
  std::array<double, 3> drel_axis_mean{};

  /// max - min and means over `reports`; a non-positive range becomes 1.
  static NormalisationStats from_reports(std::span<const PropertyReport> reports);
};

struct GradedTarget {
  Phase phase = Phase::Pore;
  Axis axis = Axis::X;
  double start = 0.2;  // target fraction in the first slice
  double end = 0.6;    // target fraction in the last slice
};

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::Ssa;
  /// Weight of SSA in the weighted objective; D_rel gets 1 - gamma.
  double gamma = 0.5;
  Axis axis = Axis::X;
  /// Samples per evaluation: z plus batch_size - 1 perturbations within
  /// `batch_radius` of it.
  int batch_size = 1;
  double batch_radius = 0.1;
  GradedTarget graded;
  /// Frozen from the initial design when absent.
  std::optional<NormalisationStats> normalisation;

  double beta() const noexcept { return 1.0 - gamma; }
  void validate() const;
};

bool needs_normalisation(ObjectiveKind k) noexcept;
bool needs_transport(ObjectiveKind k) noexcept;
bool needs_volume(ObjectiveKind k) noexcept;

/// sqrt(mean((values - target)^2)).
double rmse(std::span<const double> values, double target);
/// sqrt(mean((a - b)^2)); sizes must match.
double rmse(std::span<const double> a, std::span<const double> b);
/// m evenly spaced values from a to b inclusive (a when m == 1).
std::vector<double> linspace(double a, double b, std::size_t m);

double eval_ssa(const PropertyReport& r);
double eval_drel(const PropertyReport& r);
double eval_drel_axis(const PropertyReport& r, Axis axis);
double eval_weighted(const PropertyReport& r, const ObjectiveSpec& spec);
double eval_constrained_vf(std::span<const PropertyReport> batch, const ObjectiveSpec& spec);
double eval_constrained_porosity(std::span<const PropertyReport> batch, const ObjectiveSpec& spec);
double eval_drel_axis_constrained(std::span<const PropertyReport> batch, const ObjectiveSpec& spec);
double eval_graded(const Microstructure& m, const ObjectiveSpec& spec);
/// The graded target profile for a volume of dims `d`.
std::vector<double> graded_target(const GradedTarget& g, Dims d);

/// Dispatches on spec.kind. Single-report objectives average over the batch;
/// `volumes` is only read by the graded objective.
double evaluate_objective(const ObjectiveSpec& spec, std::span<const PropertyReport> batch,
                          std::span<const Microstructure> volumes);

}  // namespace microforge
