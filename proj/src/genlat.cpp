#include "microforge/genlat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "microforge/rng.hpp"

namespace microforge {

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  if (sigma <= 0.0) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> w(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double v = std::exp(-0.5 * static_cast<double>(k * k) / (sigma * sigma));
    w[static_cast<std::size_t>(k + radius)] = v;
    sum += v;
  }
  for (double& v : w) v /= sum;
  return w;
}

struct Grid {
  std::array<int, 3> n{};
  std::vector<double> data;

  std::size_t index(int x, int y, int z) const noexcept {
    return (static_cast<std::size_t>(z) * static_cast<std::size_t>(n[1]) + static_cast<std::size_t>(y)) *
               static_cast<std::size_t>(n[0]) +
           static_cast<std::size_t>(x);
  }
};

// Generic separable pass along `axis`. `taps(o)` yields (source index, weight)
// pairs for output position o along that axis.
template <typename Taps>
Grid apply_axis(const Grid& in, int axis, int out_extent, Taps&& taps) {
  Grid out;
  out.n = in.n;
  out.n[static_cast<std::size_t>(axis)] = out_extent;
  out.data.assign(static_cast<std::size_t>(out.n[0]) * static_cast<std::size_t>(out.n[1]) *
                      static_cast<std::size_t>(out.n[2]),
                  0.0);
  std::array<int, 3> c{};
  for (c[2] = 0; c[2] < out.n[2]; ++c[2]) {
    for (c[1] = 0; c[1] < out.n[1]; ++c[1]) {
      for (c[0] = 0; c[0] < out.n[0]; ++c[0]) {
        std::array<int, 3> s = c;
        double acc = 0.0;
        for (const auto& [src, weight] : taps(c[static_cast<std::size_t>(axis)])) {
          s[static_cast<std::size_t>(axis)] = src;
          acc += weight * in.data[in.index(s[0], s[1], s[2])];
        }
        out.data[out.index(c[0], c[1], c[2])] = acc;
      }
    }
  }
  return out;
}

using TapList = std::vector<std::pair<int, double>>;

// Convolution with edge replication; output extent equals input extent.
Grid smooth_clamped(Grid g, std::span<const double> w) {
  const int radius = static_cast<int>(w.size() / 2);
  if (radius == 0) return g;
  for (int axis = 0; axis < 3; ++axis) {
    const int n = g.n[static_cast<std::size_t>(axis)];
    std::vector<TapList> table(static_cast<std::size_t>(n));
    for (int o = 0; o < n; ++o) {
      for (int k = -radius; k <= radius; ++k) {
        table[static_cast<std::size_t>(o)].emplace_back(std::clamp(o + k, 0, n - 1),
                                                        w[static_cast<std::size_t>(k + radius)]);
      }
    }
    g = apply_axis(g, axis, n, [&](int o) -> const TapList& { return table[static_cast<std::size_t>(o)]; });
  }
  return g;
}

// "Valid" convolution: each axis shrinks by 2 * radius.
Grid filter_valid(Grid g, std::span<const double> w) {
  const int radius = static_cast<int>(w.size() / 2);
  if (radius == 0) return g;
  for (int axis = 0; axis < 3; ++axis) {
    const int n_out = g.n[static_cast<std::size_t>(axis)] - 2 * radius;
    std::vector<TapList> table(static_cast<std::size_t>(n_out));
    for (int o = 0; o < n_out; ++o) {
      for (int k = -radius; k <= radius; ++k) {
        table[static_cast<std::size_t>(o)].emplace_back(o + radius + k, w[static_cast<std::size_t>(k + radius)]);
      }
    }
    g = apply_axis(g, axis, n_out, [&](int o) -> const TapList& { return table[static_cast<std::size_t>(o)]; });
  }
  return g;
}

// Cell-centred linear interpolation between latent nodes, clamped at the ends.
Grid upsample_trilinear(Grid g, int factor) {
  for (int axis = 0; axis < 3; ++axis) {
    const int n_in = g.n[static_cast<std::size_t>(axis)];
    const int n_out = n_in * factor;
    std::vector<TapList> table(static_cast<std::size_t>(n_out));
    for (int o = 0; o < n_out; ++o) {
      const double t = (static_cast<double>(o) + 0.5) / static_cast<double>(factor) - 0.5;
      const double fl = std::floor(t);
      const double frac = t - fl;
      const int i0 = std::clamp(static_cast<int>(fl), 0, n_in - 1);
      const int i1 = std::clamp(static_cast<int>(fl) + 1, 0, n_in - 1);
      table[static_cast<std::size_t>(o)] = {{i0, 1.0 - frac}, {i1, frac}};
    }
    g = apply_axis(g, axis, n_out, [&](int o) -> const TapList& { return table[static_cast<std::size_t>(o)]; });
  }
  return g;
}

}  // namespace

LatentVector::LatentVector(std::vector<double> values) : values_(std::move(values)) {
  for (double& v : values_) {
    if (std::isnan(v)) throw std::invalid_argument("latent component is NaN");
    if (v < kLatentLower || v > kLatentUpper) {
      v = std::clamp(v, kLatentLower, kLatentUpper);
      ++clamped_;
    }
  }
}

Dims GeneratorConfig::latent_dims() const {
  const auto& d = output_dims;
  if (d.nx <= 0 || d.ny <= 0 || d.nz <= 0 || d.nx % kLatentUpsampling != 0 || d.ny % kLatentUpsampling != 0 ||
      d.nz % kLatentUpsampling != 0) {
    throw std::invalid_argument("output dims " + to_string(d) + " must be positive multiples of " +
                                std::to_string(kLatentUpsampling));
  }
  return {d.nx / kLatentUpsampling, d.ny / kLatentUpsampling, d.nz / kLatentUpsampling};
}

std::vector<double> gaussian_random_field(Dims dims, std::array<int, 3> origin, double correlation_length,
                                          std::uint64_t seed, std::uint64_t stream) {
  const auto w = gaussian_kernel(correlation_length);
  const int radius = static_cast<int>(w.size() / 2);
  Grid noise;
  noise.n = {dims.nx + 2 * radius, dims.ny + 2 * radius, dims.nz + 2 * radius};
  noise.data.resize(static_cast<std::size_t>(noise.n[0]) * static_cast<std::size_t>(noise.n[1]) *
                    static_cast<std::size_t>(noise.n[2]));
  for (int z = 0; z < noise.n[2]; ++z) {
    for (int y = 0; y < noise.n[1]; ++y) {
      for (int x = 0; x < noise.n[0]; ++x) {
        const auto key = hash_coords(seed, stream, origin[0] + x - radius, origin[1] + y - radius,
                                     origin[2] + z - radius);
        noise.data[noise.index(x, y, z)] = hashed_normal(key);
      }
    }
  }
  Grid field = filter_valid(std::move(noise), w);
  double sum_sq = 0.0;
  for (double v : w) sum_sq += v * v;
  // Separable filter of unit white noise: var = (sum w^2)^3.
  const double inv_std = 1.0 / std::pow(sum_sq, 1.5);
  for (double& v : field.data) v *= inv_std;
  return std::move(field.data);
}

ProceduralGenerator::ProceduralGenerator(GeneratorConfig cfg) : cfg_(std::move(cfg)) {
  (void)cfg_.latent_dims();
  if (!(cfg_.voxel_size_um > 0.0)) throw std::invalid_argument("voxel size must be positive");
  for (Phase p : kAllPhases) {
    const auto& ch = cfg_.channel(p);
    if (ch.correlation_length < 0.0) throw std::invalid_argument("correlation length must be non-negative");
    basis_[static_cast<std::size_t>(code(p))] =
        gaussian_random_field(cfg_.output_dims, {0, 0, 0}, ch.correlation_length, cfg_.seed,
                              static_cast<std::uint64_t>(code(p)));
  }
}

std::vector<double> ProceduralGenerator::latent_field(const LatentVector& z) const {
  const Dims ld = cfg_.latent_dims();
  if (z.size() != ld.count()) {
    throw std::invalid_argument("latent has " + std::to_string(z.size()) + " components but output " +
                                to_string(cfg_.output_dims) + " needs " + std::to_string(ld.count()));
  }
  Grid g;
  g.n = {ld.nx, ld.ny, ld.nz};
  g.data.assign(z.values().begin(), z.values().end());
  g = upsample_trilinear(std::move(g), kLatentUpsampling);
  g = smooth_clamped(std::move(g), gaussian_kernel(cfg_.smoothing_width));
  return std::move(g.data);
}

Microstructure ProceduralGenerator::generate(const LatentVector& z) {
  const auto field = latent_field(z);
  std::vector<Phase> labels(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) {
    Phase best = Phase::Pore;
    double best_score = -std::numeric_limits<double>::infinity();
    for (Phase p : kAllPhases) {
      const auto& ch = cfg_.channel(p);
      const double s =
          ch.latent_weight * field[i] + ch.noise_weight * basis_[static_cast<std::size_t>(code(p))][i] + ch.offset;
      if (s > best_score) {  // strict: ties go to the lower phase code
        best_score = s;
        best = p;
      }
    }
    labels[i] = best;
  }
  return Microstructure(cfg_.output_dims, cfg_.voxel_size_um, std::move(labels));
}

Microstructure generate(const LatentVector& z, const GeneratorConfig& cfg) {
  ProceduralGenerator gen(cfg);
  return gen.generate(z);
}

}  // namespace microforge
