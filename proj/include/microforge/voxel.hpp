#pragma once

// Three-phase voxel microstructures and their on-disk formats.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace microforge {

/// Phase codes are fixed; external generators rely on them.
enum class Phase : std::uint8_t { Pore = 0, NMC = 1, CBD = 2 };

inline constexpr std::array<Phase, 3> kAllPhases{Phase::Pore, Phase::NMC, Phase::CBD};
inline constexpr int kPhaseCount = 3;
inline constexpr double kDefaultVoxelSizeUm = 0.4;

constexpr int code(Phase p) noexcept { return static_cast<int>(p); }
std::string_view phase_name(Phase p) noexcept;
Phase parse_phase(std::string_view name);

enum class Axis : int { X = 0, Y = 1, Z = 2 };
inline constexpr std::array<Axis, 3> kAllAxes{Axis::X, Axis::Y, Axis::Z};

constexpr int code(Axis a) noexcept { return static_cast<int>(a); }
std::string_view axis_name(Axis a) noexcept;
Axis parse_axis(std::string_view name);

struct Dims {
  int nx = 0;
  int ny = 0;
  int nz = 0;

  constexpr std::size_t count() const noexcept {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
  }
  constexpr int extent(Axis a) const noexcept {
    return a == Axis::X ? nx : (a == Axis::Y ? ny : nz);
  }
  constexpr std::array<int, 3> as_array() const noexcept { return {nx, ny, nz}; }
  friend constexpr bool operator==(const Dims&, const Dims&) = default;
};

std::string to_string(const Dims& d);

/// Dense label grid, x fastest. Immutable once constructed.
class Microstructure {
 public:
  Microstructure(Dims dims, double voxel_size_um, std::vector<Phase> labels);
  Microstructure(Dims dims, double voxel_size_um, Phase fill);

  const Dims& dims() const noexcept { return dims_; }
  double voxel_size() const noexcept { return voxel_size_; }
  std::size_t size() const noexcept { return labels_.size(); }
  std::span<const Phase> labels() const noexcept { return labels_; }

  std::size_t index(int x, int y, int z) const noexcept {
    return (static_cast<std::size_t>(z) * static_cast<std::size_t>(dims_.ny) + static_cast<std::size_t>(y)) *
               static_cast<std::size_t>(dims_.nx) +
           static_cast<std::size_t>(x);
  }
  Phase at(int x, int y, int z) const noexcept { return labels_[index(x, y, z)]; }

  friend bool operator==(const Microstructure&, const Microstructure&) = default;

 private:
  Dims dims_;
  double voxel_size_;
  std::vector<Phase> labels_;
};

/// Per-phase voxel counts and fractions.
struct PhaseFractions {
  std::array<double, kPhaseCount> values{};

  double operator[](Phase p) const noexcept { return values[static_cast<std::size_t>(code(p))]; }
  double& operator[](Phase p) noexcept { return values[static_cast<std::size_t>(code(p))]; }
};

std::array<std::size_t, kPhaseCount> phase_counts(const Microstructure& m);
PhaseFractions volume_fractions(const Microstructure& m);

/// Fraction of `p` in each plane perpendicular to `axis`.
std::vector<double> slice_profile(const Microstructure& m, Phase p, Axis axis);

enum class VolumeFormat { RawU8, CsvSlices };
VolumeFormat parse_volume_format(std::string_view name);

class VolumeError : public std::runtime_error {
 public:
  enum class Kind { DimensionMismatch, InvalidLabel, MalformedHeader, Io };

  VolumeError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Header path paired with a raw payload: same stem, `.hdr` extension.
std::filesystem::path header_path_for(const std::filesystem::path& raw_path);

/// raw-u8 writes `path` (payload) and its `.hdr` sidecar; csv-slices treats
/// `path` as a directory holding `header.hdr` and one `slice_NNNN.csv` per z.
void write_volume(const Microstructure& m, const std::filesystem::path& path, VolumeFormat format);
Microstructure read_volume(const std::filesystem::path& path, VolumeFormat format);

}  // namespace microforge
