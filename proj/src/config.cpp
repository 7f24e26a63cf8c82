#include "microforge/config.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "microforge/text.hpp"

namespace microforge {

namespace {

namespace pt = boost::property_tree;

using text::format_double;

std::string_view backend_name(GeneratorBackend b) { return b == GeneratorBackend::External ? "external" : "builtin"; }

// Flat view of the parsed file that remembers which keys were consumed.
class Reader {
 public:
  explicit Reader(const pt::ptree& tree) {
    for (const auto& [section, body] : tree) {
      if (body.empty() && !body.data().empty()) throw ConfigError("key '" + section + "' is outside any section");
      for (const auto& [key, value] : body) values_[section + "." + key] = value.data();
    }
  }

  std::optional<std::string> get(const std::string& key) {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    used_.insert(key);
    return std::string(text::trim(it->second));
  }

  template <typename F>
  void read(const std::string& key, F&& assign) {
    if (auto v = get(key)) {
      try {
        assign(*v);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        throw ConfigError(key + ": " + e.what());
      }
    }
  }

  void number(const std::string& key, double& out) {
    read(key, [&](const std::string& v) { out = text::parse_double(v); });
  }
  template <typename Int>
  void integer(const std::string& key, Int& out) {
    read(key, [&](const std::string& v) { out = text::parse_int<Int>(v); });
  }
  void boolean(const std::string& key, bool& out) {
    read(key, [&](const std::string& v) {
      if (v == "true" || v == "1" || v == "yes") {
        out = true;
      } else if (v == "false" || v == "0" || v == "no") {
        out = false;
      } else {
        throw ConfigError(key + ": expected true or false, got '" + v + "'");
      }
    });
  }

  void reject_unknown() const {
    for (const auto& [key, value] : values_) {
      if (!used_.count(key)) throw ConfigError("unknown configuration key '" + key + "'");
    }
  }

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

template <std::size_t N>
std::array<double, N> parse_triple(const std::string& v) {
  const auto parts = text::split(v, ',');
  if (parts.size() != N) throw std::invalid_argument("expected " + std::to_string(N) + " comma-separated values");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = text::parse_double(parts[i]);
  return out;
}

template <std::size_t N>
std::string join(const std::array<double, N>& v) {
  std::string s;
  for (std::size_t i = 0; i < N; ++i) {
    if (i) s += ',';
    s += format_double(v[i]);
  }
  return s;
}

}  // namespace

void RunConfig::validate() const {
  try {
    generator.latent_dims();
    solver.validate();
    objective.validate();
    design.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (generator.output_dims.nx < 1 || generator.output_dims.ny < 1 || generator.output_dims.nz < 1) {
    throw ConfigError("generator dims must be positive");
  }
  if (!(generator.voxel_size_um > 0.0)) throw ConfigError("voxel_size_um must be positive");
  if (!(generator.smoothing_width >= 0.0)) throw ConfigError("smoothing_width must be non-negative");
  for (const auto& c : generator.channels) {
    if (!(c.correlation_length > 0.0)) throw ConfigError("correlation lengths must be positive");
  }
  if (design.dims != static_cast<int>(generator.latent_size())) {
    throw ConfigError("design dimension does not match the generator's latent size");
  }
  if (design.lower != kLatentLower || design.upper != kLatentUpper) {
    throw ConfigError("design bounds must be [-5, 5], the latent bounds of the generator");
  }
  if (backend == GeneratorBackend::External && endpoint.command.empty()) {
    throw ConfigError("external backend needs generator.command");
  }
  if (n_init < 1) throw ConfigError("n_init must be at least 1");
  if (i_tot < 0) throw ConfigError("i_tot must be non-negative");
  if (gp_starts < 1 || acquisition_starts < 1 || acquisition_screening < 1) {
    throw ConfigError("gp_starts, acquisition_starts and acquisition_screening must be at least 1");
  }
  if (early_stop_patience < 0) throw ConfigError("early_stop_patience must be non-negative");
  if (snapshot_interval < 0) throw ConfigError("snapshot_interval must be non-negative");
}

LoopConfig RunConfig::loop_config() const {
  LoopConfig c;
  c.n_init = n_init;
  c.i_tot = i_tot;
  c.seed = seed;
  c.kernel = kernel;
  c.gp_starts = gp_starts;
  c.acquisition.starts = acquisition_starts;
  c.acquisition.screening_points = acquisition_screening;
  c.fail_hard = fail_hard;
  if (early_stop_patience > 0) c.early_stop = EarlyStop{early_stop_patience, early_stop_tolerance};
  return c;
}

std::unique_ptr<MicrostructureSource> RunConfig::make_source() const {
  if (backend == GeneratorBackend::External) {
    return std::make_unique<ExternalGenerator>(endpoint, generator.output_dims);
  }
  return std::make_unique<ProceduralGenerator>(generator);
}

RunConfig read_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  }
  Reader r(tree);
  RunConfig c;

  r.read("generator.backend", [&](const std::string& v) {
    if (v == "builtin") {
      c.backend = GeneratorBackend::Builtin;
    } else if (v == "external") {
      c.backend = GeneratorBackend::External;
    } else {
      throw ConfigError("generator.backend: expected builtin or external, got '" + v + "'");
    }
  });
  r.read("generator.dims", [&](const std::string& v) {
    const auto parts = text::split(v, ',');
    if (parts.size() != 3) throw std::invalid_argument("expected nx,ny,nz");
    c.generator.output_dims = {text::parse_int<int>(parts[0]), text::parse_int<int>(parts[1]),
                               text::parse_int<int>(parts[2])};
  });
  r.integer("generator.seed", c.generator.seed);
  r.number("generator.smoothing_width", c.generator.smoothing_width);
  r.number("generator.voxel_size_um", c.generator.voxel_size_um);
  for (Phase p : kAllPhases) {
    const std::string prefix = "generator." + std::string(phase_name(p)) + "_";
    auto& ch = c.generator.channel(p);
    r.number(prefix + "latent_weight", ch.latent_weight);
    r.number(prefix + "noise_weight", ch.noise_weight);
    r.number(prefix + "offset", ch.offset);
    r.number(prefix + "correlation_length", ch.correlation_length);
  }
  r.read("generator.command", [&](const std::string& v) { c.endpoint.command = v; });
  r.read("generator.timeout_s", [&](const std::string& v) {
    const double s = text::parse_double(v);
    if (!(s > 0.0)) throw std::invalid_argument("timeout must be positive");
    c.endpoint.timeout = std::chrono::milliseconds(static_cast<long long>(std::llround(s * 1000.0)));
  });
  r.boolean("generator.concurrency_safe", c.endpoint.concurrency_safe);
  r.read("generator.work_root", [&](const std::string& v) { c.endpoint.work_root = v; });
  r.boolean("generator.keep_jobs", c.endpoint.keep_jobs);

  r.integer("solver.max_iterations", c.solver.max_iterations);
  r.number("solver.tolerance", c.solver.tolerance);
  r.number("solver.over_relaxation", c.solver.over_relaxation);
  r.integer("solver.check_interval", c.solver.check_interval);
  r.integer("solver.threads", c.solver.threads);

  r.number("design.lower", c.design.lower);
  r.number("design.upper", c.design.upper);

  r.read("objective.kind", [&](const std::string& v) { c.objective.kind = parse_objective(v); });
  r.number("objective.gamma", c.objective.gamma);
  r.read("objective.axis", [&](const std::string& v) { c.objective.axis = parse_axis(v); });
  r.integer("objective.batch_size", c.objective.batch_size);
  r.number("objective.batch_radius", c.objective.batch_radius);
  r.read("objective.graded_phase", [&](const std::string& v) { c.objective.graded.phase = parse_phase(v); });
  r.read("objective.graded_axis", [&](const std::string& v) { c.objective.graded.axis = parse_axis(v); });
  r.number("objective.graded_start", c.objective.graded.start);
  r.number("objective.graded_end", c.objective.graded.end);
  {
    const char* keys[] = {"objective.ssa_range", "objective.drel_range", "objective.phi_range", "objective.phi_mean",
                          "objective.drel_axis_mean"};
    int present = 0;
    NormalisationStats n;
    r.number(keys[0], n.ssa_range);
    r.number(keys[1], n.drel_range);
    r.read(keys[2], [&](const std::string& v) { n.phi_range = parse_triple<3>(v); });
    r.read(keys[3], [&](const std::string& v) { n.phi_mean = parse_triple<3>(v); });
    r.read(keys[4], [&](const std::string& v) { n.drel_axis_mean = parse_triple<3>(v); });
    for (const char* k : keys) present += tree.get_optional<std::string>(pt::ptree::path_type(k, '.')) ? 1 : 0;
    if (present != 0 && present != 5) {
      throw ConfigError("explicit normalisation needs all of ssa_range, drel_range, phi_range, phi_mean, drel_axis_mean");
    }
    if (present == 5) c.objective.normalisation = n;
  }

  r.integer("loop.n_init", c.n_init);
  r.integer("loop.i_tot", c.i_tot);
  r.integer("loop.seed", c.seed);
  r.read("loop.kernel", [&](const std::string& v) { c.kernel = parse_kernel(v); });
  r.integer("loop.gp_starts", c.gp_starts);
  r.integer("loop.acquisition_starts", c.acquisition_starts);
  r.integer("loop.acquisition_screening", c.acquisition_screening);
  r.boolean("loop.fail_hard", c.fail_hard);
  r.integer("loop.early_stop_patience", c.early_stop_patience);
  r.number("loop.early_stop_tolerance", c.early_stop_tolerance);
  r.integer("loop.snapshot_interval", c.snapshot_interval);

  r.read("output.dir", [&](const std::string& v) { c.output_dir = v; });

  r.reject_unknown();
  try {
    c.design.dims = static_cast<int>(c.generator.latent_size());
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  c.validate();
  return c;
}

RunConfig read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file " + path.string());
  return read_config(in);
}

void write_config(std::ostream& out, const RunConfig& c) {
  const auto& g = c.generator;
  out << "[generator]\n";
  out << "backend = " << backend_name(c.backend) << '\n';
  out << "dims = " << g.output_dims.nx << ',' << g.output_dims.ny << ',' << g.output_dims.nz << '\n';
  out << "seed = " << g.seed << '\n';
  out << "smoothing_width = " << format_double(g.smoothing_width) << '\n';
  out << "voxel_size_um = " << format_double(g.voxel_size_um) << '\n';
  for (Phase p : kAllPhases) {
    const auto& ch = g.channel(p);
    const std::string prefix(phase_name(p));
    out << prefix << "_latent_weight = " << format_double(ch.latent_weight) << '\n';
    out << prefix << "_noise_weight = " << format_double(ch.noise_weight) << '\n';
    out << prefix << "_offset = " << format_double(ch.offset) << '\n';
    out << prefix << "_correlation_length = " << format_double(ch.correlation_length) << '\n';
  }
  if (!c.endpoint.command.empty()) out << "command = " << c.endpoint.command << '\n';
  out << "timeout_s = " << format_double(static_cast<double>(c.endpoint.timeout.count()) / 1000.0) << '\n';
  out << "concurrency_safe = " << (c.endpoint.concurrency_safe ? "true" : "false") << '\n';
  if (!c.endpoint.work_root.empty()) out << "work_root = " << c.endpoint.work_root.string() << '\n';
  out << "keep_jobs = " << (c.endpoint.keep_jobs ? "true" : "false") << '\n';

  out << "\n[solver]\n";
  out << "max_iterations = " << c.solver.max_iterations << '\n';
  out << "tolerance = " << format_double(c.solver.tolerance) << '\n';
  out << "over_relaxation = " << format_double(c.solver.over_relaxation) << '\n';
  out << "check_interval = " << c.solver.check_interval << '\n';
  out << "threads = " << c.solver.threads << '\n';

  out << "\n[design]\n";
  out << "lower = " << format_double(c.design.lower) << '\n';
  out << "upper = " << format_double(c.design.upper) << '\n';

  const auto& o = c.objective;
  out << "\n[objective]\n";
  out << "kind = " << objective_name(o.kind) << '\n';
  out << "gamma = " << format_double(o.gamma) << '\n';
  out << "axis = " << axis_name(o.axis) << '\n';
  out << "batch_size = " << o.batch_size << '\n';
  out << "batch_radius = " << format_double(o.batch_radius) << '\n';
  out << "graded_phase = " << phase_name(o.graded.phase) << '\n';
  out << "graded_axis = " << axis_name(o.graded.axis) << '\n';
  out << "graded_start = " << format_double(o.graded.start) << '\n';
  out << "graded_end = " << format_double(o.graded.end) << '\n';
  if (o.normalisation) {
    const auto& n = *o.normalisation;
    out << "ssa_range = " << format_double(n.ssa_range) << '\n';
    out << "drel_range = " << format_double(n.drel_range) << '\n';
    out << "phi_range = " << join(n.phi_range) << '\n';
    out << "phi_mean = " << join(n.phi_mean) << '\n';
    out << "drel_axis_mean = " << join(n.drel_axis_mean) << '\n';
  }

  out << "\n[loop]\n";
  out << "n_init = " << c.n_init << '\n';
  out << "i_tot = " << c.i_tot << '\n';
  out << "seed = " << c.seed << '\n';
  out << "kernel = " << kernel_name(c.kernel) << '\n';
  out << "gp_starts = " << c.gp_starts << '\n';
  out << "acquisition_starts = " << c.acquisition_starts << '\n';
  out << "acquisition_screening = " << c.acquisition_screening << '\n';
  out << "fail_hard = " << (c.fail_hard ? "true" : "false") << '\n';
  out << "early_stop_patience = " << c.early_stop_patience << '\n';
  out << "early_stop_tolerance = " << format_double(c.early_stop_tolerance) << '\n';
  out << "snapshot_interval = " << c.snapshot_interval << '\n';

  out << "\n[output]\n";
  out << "dir = " << c.output_dir.string() << '\n';
}

std::string config_to_string(const RunConfig& cfg) {
  std::ostringstream os;
  write_config(os, cfg);
  return os.str();
}

}  // namespace microforge
