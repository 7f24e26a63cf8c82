// Python bindings. Volumes cross the boundary as uint8 arrays of shape
// (nz, ny, nx), matching the x-fastest layout of Microstructure.

#include <sstream>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "microforge/bo.hpp"
#include "microforge/commands.hpp"
#include "microforge/genlat.hpp"
#include "microforge/gp.hpp"
#include "microforge/lhs.hpp"
#include "microforge/props.hpp"
#include "microforge/voxel.hpp"

namespace py = pybind11;
using namespace microforge;

namespace {

using LabelArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Dims dims_from_tuple(const std::array<int, 3>& d) { return Dims{d[0], d[1], d[2]}; }

LabelArray to_array(const Microstructure& m) {
  const auto& d = m.dims();
  LabelArray out({d.nz, d.ny, d.nx});
  auto* dst = out.mutable_data();
  const auto src = m.labels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<std::uint8_t>(src[i]);
  return out;
}

Microstructure from_array(const LabelArray& a, double voxel_size) {
  if (a.ndim() != 3) throw py::value_error("labels must be a 3-D array of shape (nz, ny, nx)");
  const Dims d{static_cast<int>(a.shape(2)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0))};
  std::vector<Phase> labels(d.count());
  const auto* src = a.data();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (src[i] >= kPhaseCount) throw py::value_error("label values must be 0 (pore), 1 (NMC) or 2 (CBD)");
    labels[i] = static_cast<Phase>(src[i]);
  }
  return Microstructure(d, voxel_size, std::move(labels));
}

py::dict fractions_dict(const PhaseFractions& f) {
  py::dict out;
  for (Phase p : kAllPhases) out[py::str(std::string(phase_name(p)))] = f[p];
  return out;
}

py::object optional_float(const std::optional<double>& v) { return v ? py::cast(*v) : py::none(); }

py::dict report_dict(const PropertyReport& r) {
  py::dict out;
  out["fractions"] = fractions_dict(r.fractions);
  out["ssa_nmc"] = r.ssa_nmc;
  for (Axis a : kAllAxes) {
    const std::string n(axis_name(a));
    out[py::str("drel_" + n)] = r.drel(a);
    out[py::str("tau_" + n)] = r.tau(a);
  }
  out["drel_mean"] = r.drel_mean();
  out["tau_mean"] = r.tau_mean();
  out["converged"] = r.converged();
  out["nmc_particle_count"] = r.nmc_particle_count;
  out["nmc_equivalent_diameter_mean"] = optional_float(r.nmc_equivalent_diameter_mean);
  out["nmc_sphericity_mean"] = optional_float(r.nmc_sphericity_mean);
  return out;
}

SolverConfig solver(int max_iterations, double tolerance, int threads) {
  SolverConfig cfg;
  cfg.max_iterations = max_iterations;
  cfg.tolerance = tolerance;
  cfg.threads = threads;
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_microforge, m) {
  m.doc() = "Procedural latent generator, property evaluators, GP surrogate and BO helpers";

  m.attr("LATENT_LOWER") = kLatentLower;
  m.attr("LATENT_UPPER") = kLatentUpper;
  m.attr("DEFAULT_VOXEL_SIZE_UM") = kDefaultVoxelSizeUm;

  m.def(
      "latent_size",
      [](std::array<int, 3> dims) {
        GeneratorConfig cfg;
        cfg.output_dims = dims_from_tuple(dims);
        return cfg.latent_size();
      },
      py::arg("dims"), "Latent dimensionality for an output volume of (nx, ny, nz) voxels.");

  m.def(
      "generate",
      [](const std::vector<double>& z, std::array<int, 3> dims, std::uint64_t seed, double voxel_size) {
        GeneratorConfig cfg;
        cfg.output_dims = dims_from_tuple(dims);
        cfg.seed = seed;
        cfg.voxel_size_um = voxel_size;
        if (z.size() != cfg.latent_size())
          throw py::value_error("latent has " + std::to_string(z.size()) + " components, expected " +
                                std::to_string(cfg.latent_size()));
        Microstructure out = [&] {
          py::gil_scoped_release release;
          return microforge::generate(LatentVector(z), cfg);
        }();
        return to_array(out);
      },
      py::arg("z"), py::arg("dims") = std::array<int, 3>{64, 64, 64}, py::arg("seed") = 42,
      py::arg("voxel_size") = kDefaultVoxelSizeUm,
      "Decode a latent vector into a label volume of shape (nz, ny, nx).");

  m.def(
      "volume_fractions", [](const LabelArray& a) { return fractions_dict(volume_fractions(from_array(a, 1.0))); },
      py::arg("labels"));

  m.def(
      "ssa_nmc", [](const LabelArray& a, double voxel_size) { return ssa_nmc(from_array(a, voxel_size)); },
      py::arg("labels"), py::arg("voxel_size") = kDefaultVoxelSizeUm, "NMC/pore interfacial area per volume (1/um).");

  m.def(
      "relative_diffusivity",
      [](const LabelArray& a, const std::string& axis, const std::string& phase, int max_iterations,
         double tolerance) {
        const auto ms = from_array(a, kDefaultVoxelSizeUm);
        const auto cfg = solver(max_iterations, tolerance, 1);
        const Axis ax = parse_axis(axis);
        const Phase ph = parse_phase(phase);
        DiffusionResult r;
        {
          py::gil_scoped_release release;
          r = relative_diffusivity(ms, ph, ax, cfg);
        }
        py::dict out;
        out["relative_diffusivity"] = r.relative_diffusivity;
        out["tortuosity"] = r.tortuosity;
        out["percolating"] = r.percolating;
        out["converged"] = r.converged;
        out["iterations"] = r.iterations;
        out["residual"] = r.residual;
        return out;
      },
      py::arg("labels"), py::arg("axis") = "x", py::arg("phase") = "pore",
      py::arg("max_iterations") = SolverConfig{}.max_iterations, py::arg("tolerance") = SolverConfig{}.tolerance);

  m.def(
      "evaluate",
      [](const LabelArray& a, double voxel_size, int threads) {
        const auto ms = from_array(a, voxel_size);
        const auto cfg = solver(SolverConfig{}.max_iterations, SolverConfig{}.tolerance, threads);
        PropertyReport r;
        {
          py::gil_scoped_release release;
          r = evaluate_all(ms, cfg);
        }
        return report_dict(r);
      },
      py::arg("labels"), py::arg("voxel_size") = kDefaultVoxelSizeUm, py::arg("threads") = 1,
      "Every property in one report.");

  m.def("latin_hypercube", &latin_hypercube, py::arg("n"), py::arg("dims"), py::arg("seed"),
        "n x dims Latin hypercube sample in [0, 1).");
  m.def("alpha_schedule", &alpha_schedule, py::arg("i"), py::arg("i_tot"));
  m.def("derive_seed", &derive_seed, py::arg("seed"), py::arg("stream"), py::arg("step"));

  py::class_<GPModel>(m, "GPModel")
      .def_static(
          "fit",
          [](const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::string& kernel, int starts,
             std::uint64_t seed) {
            if (X.rows() != y.size()) throw py::value_error("X and y disagree on the number of points");
            FitOptions opt;
            opt.kernel = parse_kernel(kernel);
            opt.starts = starts;
            opt.seed = seed;
            py::gil_scoped_release release;
            return fit_gp(X, y, opt).model;
          },
          py::arg("X"), py::arg("y"), py::arg("kernel") = "isotropic", py::arg("starts") = 5, py::arg("seed") = 0,
          "Fit hyperparameters by multi-start NLL minimisation.")
      .def(
          "predict",
          [](const GPModel& g, const Eigen::VectorXd& x) {
            if (x.size() != g.dims()) throw py::value_error("query has the wrong dimensionality");
            const auto p = g.predict(x);
            return py::make_tuple(p.mean, p.variance);
          },
          py::arg("x"), "Posterior (mean, variance) at x.")
      .def_property_readonly("size", &GPModel::size)
      .def_property_readonly("dims", &GPModel::dims)
      .def_property_readonly("nll", &GPModel::nll)
      .def_property_readonly("jitter", &GPModel::jitter)
      .def_property_readonly("kernel", [](const GPModel& g) { return std::string(kernel_name(g.kernel())); })
      .def_property_readonly("lengthscale_weights", [](const GPModel& g) { return g.hyperparameters().w(); })
      .def_property_readonly("signal_variance", [](const GPModel& g) { return g.hyperparameters().signal_variance(); })
      .def_property_readonly("noise_variance", [](const GPModel& g) { return g.hyperparameters().noise_variance(); })
      .def("save",
           [](const GPModel& g) {
             std::ostringstream s;
             g.save(s);
             return s.str();
           })
      .def_static("load", [](const std::string& text) {
        std::istringstream s(text);
        return GPModel::load(s);
      });

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a microforge subcommand in-process; returns (exit_code, stdout, stderr).");
}
