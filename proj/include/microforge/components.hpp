#pragma once

// 6-connected component labelling on a voxel mask.

#include <cstdint>
#include <span>
#include <vector>

#include "microforge/voxel.hpp"

namespace microforge {

struct ComponentLabels {
  /// Per voxel: component id in [0, count), or -1 for background.
  std::vector<std::int32_t> labels;
  std::int32_t count = 0;
};

/// `mask[i] != 0` marks foreground. Components are numbered in raster order
/// of their first voxel.
ComponentLabels label_components(std::span<const std::uint8_t> mask, Dims dims);

/// Foreground mask of a single phase.
std::vector<std::uint8_t> phase_mask(const Microstructure& m, Phase p);

}  // namespace microforge
