#include "microforge/components.hpp"

#include <stdexcept>

namespace microforge {

ComponentLabels label_components(std::span<const std::uint8_t> mask, Dims dims) {
  if (mask.size() != dims.count()) throw std::invalid_argument("mask size does not match dims");
  const auto nx = static_cast<std::size_t>(dims.nx);
  const auto nxy = nx * static_cast<std::size_t>(dims.ny);

  ComponentLabels out;
  out.labels.assign(mask.size(), -1);
  std::vector<std::size_t> stack;
  for (std::size_t seed = 0; seed < mask.size(); ++seed) {
    if (!mask[seed] || out.labels[seed] >= 0) continue;
    const std::int32_t id = out.count++;
    out.labels[seed] = id;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const auto x = static_cast<int>(i % nx);
      const auto y = static_cast<int>((i / nx) % static_cast<std::size_t>(dims.ny));
      const auto z = static_cast<int>(i / nxy);
      auto visit = [&](std::size_t j) {
        if (mask[j] && out.labels[j] < 0) {
          out.labels[j] = id;
          stack.push_back(j);
        }
      };
      if (x > 0) visit(i - 1);
      if (x + 1 < dims.nx) visit(i + 1);
      if (y > 0) visit(i - nx);
      if (y + 1 < dims.ny) visit(i + nx);
      if (z > 0) visit(i - nxy);
      if (z + 1 < dims.nz) visit(i + nxy);
    }
  }
  return out;
}

std::vector<std::uint8_t> phase_mask(const Microstructure& m, Phase p) {
  std::vector<std::uint8_t> mask(m.size());
  const auto labels = m.labels();
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = labels[i] == p ? 1 : 0;
  return mask;
}

}  // namespace microforge
