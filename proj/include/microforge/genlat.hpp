#pragma once

// Latent vector -> three-phase microstructure.
//
// ProceduralGenerator is a deterministic stand-in for a trained generator
// network with the same signature: an L x L x L latent grid is upsampled
// x16 to the output grid, and each voxel is classified into the phase with
// the highest score
//
//     S_c(x) = latent_weight_c * U~(x) + noise_weight_c * G_c(x) + offset_c
//
// where U~ is the trilinearly upsampled, Gaussian-smoothed latent field and
// G_c is a fixed unit-variance Gaussian random field per phase. G_c is
// seeded per voxel from global coordinates, so volumes of different sizes
// agree wherever their coordinates overlap.
//
// ExternalGenerator delegates the same mapping to another process through a
// file-exchange protocol (see external_generate).

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "microforge/voxel.hpp"

namespace microforge {

inline constexpr double kLatentLower = -5.0;
inline constexpr double kLatentUpper = 5.0;
inline constexpr int kLatentUpsampling = 16;

/// Design variable. Components are clamped into [-5, 5] on construction.
class LatentVector {
 public:
  LatentVector() = default;
  explicit LatentVector(std::vector<double> values);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  /// Number of components that were outside the bounds and got clamped.
  std::size_t clamped_count() const noexcept { return clamped_; }

  friend bool operator==(const LatentVector& a, const LatentVector& b) { return a.values_ == b.values_; }

 private:
  std::vector<double> values_;
  std::size_t clamped_ = 0;
};

struct PhaseChannel {
  double latent_weight = 0.0;       // alpha_c
  double noise_weight = 1.0;        // beta_c
  double offset = 0.0;              // gamma_c
  double correlation_length = 5.0;  // ell_c, voxels
};

struct GeneratorConfig {
  Dims output_dims{64, 64, 64};
  std::uint64_t seed = 42;
  /// Indexed by phase code. Defaults are calibrated so latents drawn from
  /// N(0, 1) give mean fractions close to pore 0.40 / NMC 0.45 / CBD 0.15.
  std::array<PhaseChannel, kPhaseCount> channels{
      PhaseChannel{0.0, 1.0, 0.0, 5.0},
      PhaseChannel{1.0, 1.0, -0.0155, 8.0},
      PhaseChannel{-1.0, 1.0, -1.2464, 3.0},
  };
  double smoothing_width = 2.0;  // sigma_s, voxels
  double voxel_size_um = kDefaultVoxelSizeUm;

  /// Latent grid extents (output / 16). Throws if the output is not a multiple of 16.
  Dims latent_dims() const;
  std::size_t latent_size() const { return latent_dims().count(); }

  const PhaseChannel& channel(Phase p) const { return channels[static_cast<std::size_t>(code(p))]; }
  PhaseChannel& channel(Phase p) { return channels[static_cast<std::size_t>(code(p))]; }
};

/// Anything that maps latents to microstructures.
class MicrostructureSource {
 public:
  virtual ~MicrostructureSource() = default;
  virtual Microstructure generate(const LatentVector& z) = 0;
  virtual Dims output_dims() const = 0;
  std::size_t latent_size() const { return output_dims().count() / (kLatentUpsampling * kLatentUpsampling * kLatentUpsampling); }
};

class ProceduralGenerator final : public MicrostructureSource {
 public:
  explicit ProceduralGenerator(GeneratorConfig cfg);

  Microstructure generate(const LatentVector& z) override;
  Dims output_dims() const override { return cfg_.output_dims; }
  const GeneratorConfig& config() const noexcept { return cfg_; }

  /// The smoothed, upsampled latent field U~ (x fastest).
  std::vector<double> latent_field(const LatentVector& z) const;
  /// The fixed basis field G_c for phase `p` (x fastest).
  std::span<const double> basis_field(Phase p) const noexcept {
    return basis_[static_cast<std::size_t>(code(p))];
  }

 private:
  GeneratorConfig cfg_;
  std::array<std::vector<double>, kPhaseCount> basis_;
};

/// One-shot form; builds the basis fields every call.
Microstructure generate(const LatentVector& z, const GeneratorConfig& cfg);

/// Zero-mean unit-variance random field: seeded white noise filtered with a
/// Gaussian of width `correlation_length`, sampled on [origin, origin + dims).
std::vector<double> gaussian_random_field(Dims dims, std::array<int, 3> origin, double correlation_length,
                                          std::uint64_t seed, std::uint64_t stream);

// ---------------------------------------------------------------------------
// External generators

class ExternalGeneratorError : public std::runtime_error {
 public:
  enum class Kind { ProcessFailure, Timeout, MalformedVolume, InvalidLabel };

  ExternalGeneratorError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

struct ExternalGeneratorEndpoint {
  /// Executable followed by optional fixed arguments (whitespace separated).
  /// The job directory is appended as the last argument.
  std::string command;
  std::chrono::milliseconds timeout{std::chrono::seconds(120)};
  bool concurrency_safe = false;
  /// Parent of per-job directories; empty means the system temp directory.
  std::filesystem::path work_root;
  bool keep_jobs = false;
};

/// Writes `<job>/z.txt`, runs `command <job>` and reads back `<job>/volume.raw`
/// (+ `.hdr`). The returned volume is validated against `dims`.
Microstructure external_generate(const LatentVector& z, Dims dims, const ExternalGeneratorEndpoint& endpoint);

class ExternalGenerator final : public MicrostructureSource {
 public:
  ExternalGenerator(ExternalGeneratorEndpoint endpoint, Dims output_dims);

  Microstructure generate(const LatentVector& z) override;
  Dims output_dims() const override { return dims_; }

 private:
  ExternalGeneratorEndpoint endpoint_;
  Dims dims_;
  std::mutex mutex_;
};

/// Bridge protocol latent file: one value per line, then `dims=nx,ny,nz`.
void write_latent_file(const std::filesystem::path& path, const LatentVector& z, Dims dims);

}  // namespace microforge
