#include "microforge/props.hpp"

#include <cmath>
#include <future>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "microforge/components.hpp"
#include "microforge/text.hpp"

namespace microforge {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int coord(int x, int y, int z, Axis a) { return a == Axis::X ? x : (a == Axis::Y ? y : z); }

// Compact finite-volume system over the voxels of the spanning cluster.
struct DiffusionSystem {
  std::vector<std::array<std::int32_t, 6>> neighbours;  // compact ids, -1 if closed
  std::vector<double> diagonal;                         // sum of face conductances
  std::vector<double> source;                           // Dirichlet contributions
  std::vector<std::int32_t> inlet, outlet;              // voxels owning a boundary face
  std::array<std::vector<std::int32_t>, 2> colours;     // red/black sweep order
  std::vector<double> initial;
};

// Dirichlet values sit on the outer faces, half a voxel from the centres.
constexpr double kBoundaryConductance = 2.0;

DiffusionSystem build_system(const Microstructure& m, const std::vector<std::uint8_t>& active, Axis axis) {
  const auto& d = m.dims();
  const int length = d.extent(axis);
  DiffusionSystem sys;
  std::vector<std::int32_t> compact(m.size(), -1);
  std::int32_t n = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (active[i]) compact[i] = n++;
  }
  sys.neighbours.resize(static_cast<std::size_t>(n));
  sys.diagonal.assign(static_cast<std::size_t>(n), 0.0);
  sys.source.assign(static_cast<std::size_t>(n), 0.0);
  sys.initial.resize(static_cast<std::size_t>(n));

  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x) {
        const std::size_t i = m.index(x, y, z);
        const std::int32_t k = compact[i];
        if (k < 0) continue;
        auto& nb = sys.neighbours[static_cast<std::size_t>(k)];
        nb.fill(-1);
        const std::array<std::array<int, 3>, 6> offsets{
            {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}}};
        double diag = 0.0;
        for (std::size_t f = 0; f < 6; ++f) {
          const int xx = x + offsets[f][0];
          const int yy = y + offsets[f][1];
          const int zz = z + offsets[f][2];
          if (xx >= 0 && xx < d.nx && yy >= 0 && yy < d.ny && zz >= 0 && zz < d.nz) {
            const std::int32_t kk = compact[m.index(xx, yy, zz)];
            if (kk >= 0) {
              nb[f] = kk;
              diag += 1.0;
            }
          }
        }
        const int a = coord(x, y, z, axis);
        if (a == 0) {
          diag += kBoundaryConductance;
          sys.source[static_cast<std::size_t>(k)] += kBoundaryConductance * 1.0;
          sys.inlet.push_back(k);
        }
        if (a == length - 1) {
          diag += kBoundaryConductance;  // outlet value is 0
          sys.outlet.push_back(k);
        }
        sys.diagonal[static_cast<std::size_t>(k)] = diag;
        sys.colours[static_cast<std::size_t>((x + y + z) & 1)].push_back(k);
        sys.initial[static_cast<std::size_t>(k)] = 1.0 - (static_cast<double>(a) + 0.5) / static_cast<double>(length);
      }
    }
  }
  return sys;
}

struct Fluxes {
  double in = 0.0;
  double out = 0.0;
};

Fluxes boundary_fluxes(const DiffusionSystem& sys, const std::vector<double>& c) {
  Fluxes f;
  for (auto k : sys.inlet) f.in += kBoundaryConductance * (1.0 - c[static_cast<std::size_t>(k)]);
  for (auto k : sys.outlet) f.out += kBoundaryConductance * c[static_cast<std::size_t>(k)];
  return f;
}

void sweep(const DiffusionSystem& sys, std::vector<double>& c, double omega) {
  for (const auto& colour : sys.colours) {
    for (const auto k : colour) {
      const auto uk = static_cast<std::size_t>(k);
      double acc = sys.source[uk];
      for (const auto nb : sys.neighbours[uk]) {
        if (nb >= 0) acc += c[static_cast<std::size_t>(nb)];
      }
      const double target = acc / sys.diagonal[uk];
      c[uk] += omega * (target - c[uk]);
    }
  }
}

// Voxels of `phase` that belong to a component touching both end planes.
std::vector<std::uint8_t> spanning_cluster(const Microstructure& m, Phase phase, Axis axis) {
  const auto mask = phase_mask(m, phase);
  const auto comps = label_components(mask, m.dims());
  const auto& d = m.dims();
  const int length = d.extent(axis);
  std::vector<std::uint8_t> at_inlet(static_cast<std::size_t>(comps.count), 0);
  std::vector<std::uint8_t> at_outlet(static_cast<std::size_t>(comps.count), 0);
  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x) {
        const auto id = comps.labels[m.index(x, y, z)];
        if (id < 0) continue;
        const int a = coord(x, y, z, axis);
        if (a == 0) at_inlet[static_cast<std::size_t>(id)] = 1;
        if (a == length - 1) at_outlet[static_cast<std::size_t>(id)] = 1;
      }
    }
  }
  std::vector<std::uint8_t> active(m.size(), 0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto id = comps.labels[i];
    if (id >= 0 && at_inlet[static_cast<std::size_t>(id)] && at_outlet[static_cast<std::size_t>(id)]) active[i] = 1;
  }
  return active;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(over_relaxation > 1.0 && over_relaxation < 2.0)) {
    throw std::invalid_argument("over-relaxation factor must lie in (1, 2)");
  }
  if (!(tolerance > 0.0)) throw std::invalid_argument("solver tolerance must be positive");
  if (max_iterations < 1 || check_interval < 1) {
    throw std::invalid_argument("max_iterations and check_interval must be positive");
  }
}

double ssa_nmc(const Microstructure& m) {
  const auto& d = m.dims();
  std::size_t faces = 0;
  auto mixed = [](Phase a, Phase b) {
    return (a == Phase::NMC && b == Phase::Pore) || (a == Phase::Pore && b == Phase::NMC);
  };
  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x) {
        const Phase p = m.at(x, y, z);
        if (x + 1 < d.nx && mixed(p, m.at(x + 1, y, z))) ++faces;
        if (y + 1 < d.ny && mixed(p, m.at(x, y + 1, z))) ++faces;
        if (z + 1 < d.nz && mixed(p, m.at(x, y, z + 1))) ++faces;
      }
    }
  }
  const double h = m.voxel_size();
  return static_cast<double>(faces) * h * h / (static_cast<double>(m.size()) * h * h * h);
}

DiffusionResult relative_diffusivity(const Microstructure& m, Phase phase, Axis axis, const SolverConfig& cfg) {
  cfg.validate();
  const auto& d = m.dims();
  const double phi = volume_fractions(m)[phase];
  DiffusionResult r;

  const auto active = spanning_cluster(m, phase, axis);
  bool any = false;
  for (auto v : active) any = any || v;
  if (!any) {
    r.percolating = false;
    r.converged = true;
    r.relative_diffusivity = 0.0;
    r.tortuosity = kInf;
    return r;
  }
  r.percolating = true;

  const DiffusionSystem sys = build_system(m, active, axis);
  std::vector<double> c = sys.initial;
  const double length = d.extent(axis);
  const double area = static_cast<double>(d.count()) / length;

  double previous = std::numeric_limits<double>::quiet_NaN();
  Fluxes flux = boundary_fluxes(sys, c);
  int it = 0;
  while (it < cfg.max_iterations) {
    sweep(sys, c, cfg.over_relaxation);
    ++it;
    if (it % cfg.check_interval != 0 && it != cfg.max_iterations) continue;
    flux = boundary_fluxes(sys, c);
    const double mean = 0.5 * (flux.in + flux.out);
    const double imbalance = std::abs(flux.in - flux.out) / std::max(std::abs(flux.in), 1e-300);
    const double change = std::isnan(previous) ? kInf : std::abs(mean - previous) / std::max(std::abs(mean), 1e-300);
    previous = mean;
    r.residual = imbalance;
    if (imbalance < cfg.tolerance && change < cfg.tolerance) {
      r.converged = true;
      break;
    }
  }
  r.iterations = it;
  r.flux_in = flux.in;
  r.flux_out = flux.out;
  const double mean_flux = 0.5 * (flux.in + flux.out);
  r.relative_diffusivity = mean_flux * length / area;
  r.tortuosity = r.relative_diffusivity > 0.0 ? phi / r.relative_diffusivity : kInf;
  return r;
}

ParticleMetrics particle_metrics(const Microstructure& m, Phase phase) {
  const auto& d = m.dims();
  const auto comps = label_components(phase_mask(m, phase), d);
  ParticleMetrics out;
  out.particles.resize(static_cast<std::size_t>(comps.count));
  std::vector<std::size_t> faces(static_cast<std::size_t>(comps.count), 0);

  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x) {
        const auto id = comps.labels[m.index(x, y, z)];
        if (id < 0) continue;
        auto& p = out.particles[static_cast<std::size_t>(id)];
        ++p.voxels;
        auto exposed = [&](int xx, int yy, int zz) {
          if (xx < 0 || xx >= d.nx || yy < 0 || yy >= d.ny || zz < 0 || zz >= d.nz) {
            p.touches_boundary = true;
            return true;
          }
          return comps.labels[m.index(xx, yy, zz)] != id;
        };
        std::size_t f = 0;
        f += exposed(x - 1, y, z);
        f += exposed(x + 1, y, z);
        f += exposed(x, y - 1, z);
        f += exposed(x, y + 1, z);
        f += exposed(x, y, z - 1);
        f += exposed(x, y, z + 1);
        faces[static_cast<std::size_t>(id)] += f;
      }
    }
  }

  const double h = m.voxel_size();
  double wsum = 0.0, deq = 0.0, psi = 0.0;
  for (std::size_t i = 0; i < out.particles.size(); ++i) {
    auto& p = out.particles[i];
    p.volume = static_cast<double>(p.voxels) * h * h * h;
    p.surface_area = static_cast<double>(faces[i]) * h * h;
    p.equivalent_diameter = std::cbrt(6.0 * p.volume / std::numbers::pi);
    p.sphericity = std::cbrt(std::numbers::pi) * std::pow(6.0 * p.volume, 2.0 / 3.0) / p.surface_area;
    wsum += p.volume;
    deq += p.volume * p.equivalent_diameter;
    psi += p.volume * p.sphericity;
  }
  if (wsum > 0.0) {
    out.equivalent_diameter_mean = deq / wsum;
    out.sphericity_mean = psi / wsum;
  }
  return out;
}

double PropertyReport::drel_mean() const noexcept {
  return (drel(Axis::X) + drel(Axis::Y) + drel(Axis::Z)) / 3.0;
}

double PropertyReport::tau_mean() const noexcept {
  return (tau(Axis::X) + tau(Axis::Y) + tau(Axis::Z)) / 3.0;
}

bool PropertyReport::converged() const noexcept {
  for (const auto& t : pore_transport) {
    if (!t.converged) return false;
  }
  return true;
}

PropertyReport evaluate_all(const Microstructure& m, const SolverConfig& cfg) {
  cfg.validate();
  PropertyReport r;
  r.fractions = volume_fractions(m);
  r.ssa_nmc = ssa_nmc(m);

  auto solve = [&](Axis a) {
    const auto res = relative_diffusivity(m, Phase::Pore, a, cfg);
    return AxisTransport{res.relative_diffusivity, res.tortuosity, res.converged, res.iterations, res.residual};
  };
  if (cfg.threads > 1) {
    std::array<std::future<AxisTransport>, 3> jobs;
    for (Axis a : kAllAxes) jobs[static_cast<std::size_t>(code(a))] = std::async(std::launch::async, solve, a);
    for (Axis a : kAllAxes) r.pore_transport[static_cast<std::size_t>(code(a))] = jobs[static_cast<std::size_t>(code(a))].get();
  } else {
    for (Axis a : kAllAxes) r.pore_transport[static_cast<std::size_t>(code(a))] = solve(a);
  }

  const auto particles = particle_metrics(m, Phase::NMC);
  r.nmc_particle_count = particles.particles.size();
  r.nmc_equivalent_diameter_mean = particles.equivalent_diameter_mean;
  r.nmc_sphericity_mean = particles.sphericity_mean;
  return r;
}

const std::vector<std::string>& property_columns() {
  static const std::vector<std::string> columns{
      "phi_pore", "phi_nmc",   "phi_cbd",   "ssa_nmc",   "drel_x",      "drel_y",         "drel_z",
      "tau_x",    "tau_y",     "tau_z",     "nmc_d_eq",  "nmc_sphericity", "nmc_particles", "iters_x",
      "iters_y",  "iters_z",   "residual_x", "residual_y", "residual_z", "converged"};
  return columns;
}

std::vector<std::string> property_fields(const PropertyReport& r) {
  using text::format_double;
  std::vector<std::string> f;
  for (Phase p : kAllPhases) f.push_back(format_double(r.fractions[p]));
  f.push_back(format_double(r.ssa_nmc));
  for (const auto& t : r.pore_transport) f.push_back(format_double(t.relative_diffusivity));
  for (const auto& t : r.pore_transport) f.push_back(format_double(t.tortuosity));
  f.push_back(r.nmc_equivalent_diameter_mean ? format_double(*r.nmc_equivalent_diameter_mean) : "");
  f.push_back(r.nmc_sphericity_mean ? format_double(*r.nmc_sphericity_mean) : "");
  f.push_back(std::to_string(r.nmc_particle_count));
  for (const auto& t : r.pore_transport) f.push_back(std::to_string(t.iterations));
  for (const auto& t : r.pore_transport) f.push_back(format_double(t.residual));
  f.push_back(r.converged() ? "1" : "0");
  return f;
}

PropertyReport parse_property_fields(const std::vector<std::string>& fields) {
  if (fields.size() != property_columns().size()) {
    throw std::invalid_argument("property record has " + std::to_string(fields.size()) + " fields, expected " +
                                std::to_string(property_columns().size()));
  }
  PropertyReport r;
  std::size_t i = 0;
  for (Phase p : kAllPhases) r.fractions[p] = text::parse_double(fields[i++]);
  r.ssa_nmc = text::parse_double(fields[i++]);
  for (auto& t : r.pore_transport) t.relative_diffusivity = text::parse_double(fields[i++]);
  for (auto& t : r.pore_transport) t.tortuosity = text::parse_double(fields[i++]);
  if (!fields[i].empty()) r.nmc_equivalent_diameter_mean = text::parse_double(fields[i]);
  ++i;
  if (!fields[i].empty()) r.nmc_sphericity_mean = text::parse_double(fields[i]);
  ++i;
  r.nmc_particle_count = text::parse_int<std::size_t>(fields[i++]);
  for (auto& t : r.pore_transport) t.iterations = text::parse_int<int>(fields[i++]);
  for (auto& t : r.pore_transport) t.residual = text::parse_double(fields[i++]);
  const bool converged = fields[i++] == "1";
  for (auto& t : r.pore_transport) t.converged = converged;
  return r;
}

}  // namespace microforge
