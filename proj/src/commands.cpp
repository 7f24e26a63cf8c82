#include "microforge/commands.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "microforge/analysis.hpp"
#include "microforge/bo.hpp"
#include "microforge/config.hpp"
#include "microforge/problem.hpp"
#include "microforge/rng.hpp"
#include "microforge/text.hpp"
#include "microforge/trace_io.hpp"

namespace microforge {

namespace {

namespace fs = std::filesystem;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out;
};

RunConfig load_config(const CommonOptions& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : read_config_file(o.config);
  if (o.config.empty()) c.design.dims = static_cast<int>(c.generator.latent_size());
  if (o.seed) c.seed = *o.seed;
  if (o.threads) c.solver.threads = *o.threads;
  if (!o.out.empty()) c.output_dir = o.out;
  c.validate();
  return c;
}

fs::path prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  return dir;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot write " + p.string());
  return f;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot read " + p.string());
  return f;
}

std::string latent_header(std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += (i ? ",z" : "z") + std::to_string(i);
  return s;
}

std::string latent_row(const LatentVector& z) {
  std::string s;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (i) s += ',';
    s += text::format_double(z[i]);
  }
  return s;
}

std::string join_fields(const std::vector<std::string>& f) {
  std::string s;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (i) s += ',';
    s += f[i];
  }
  return s;
}

/// Parses rows of comma- or whitespace-separated numbers.
std::vector<std::vector<double>> read_number_rows(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::string normalised(t);
    for (char& ch : normalised) {
      if (ch == ',' || ch == '\t') ch = ' ';
    }
    std::istringstream is(normalised);
    std::vector<double> row;
    std::string cell;
    while (is >> cell) row.push_back(text::parse_double(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Latent vector from raw values, warning about out-of-bounds components.
LatentVector checked_latent(std::vector<double> v, std::size_t row, std::ostream& err) {
  LatentVector z(std::move(v));
  if (z.clamped_count() > 0) {
    err << "warning: latent row " << row << ": " << z.clamped_count() << " component(s) clipped to [-5, 5]\n";
  }
  return z;
}

std::vector<LatentVector> design_latents(const RunConfig& c) {
  const Eigen::MatrixXd u = lhs(c.n_init, c.design.dims, derive_seed(c.seed, 0, 0));
  std::vector<LatentVector> out;
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    const Eigen::VectorXd z = c.design.from_unit(u.row(i).transpose());
    out.emplace_back(std::vector<double>(z.data(), z.data() + z.size()));
  }
  return out;
}

std::string pad(int v, int width = 4) {
  std::ostringstream os;
  os << std::setw(width) << std::setfill('0') << v;
  return os.str();
}

// ---------------------------------------------------------------------------

int cmd_sample(const CommonOptions& o, std::ostream& out, std::ostream&) {
  const RunConfig c = load_config(o);
  const fs::path dir = prepare_dir(c.output_dir);
  auto source = c.make_source();
  const auto latents = design_latents(c);

  auto f = open_out(dir / "training.csv");
  f << latent_header(static_cast<std::size_t>(c.design.dims)) << ',' << join_fields(property_columns()) << '\n';
  for (const auto& z : latents) {
    const PropertyReport r = evaluate_all(source->generate(z), c.solver);
    f << latent_row(z) << ',' << join_fields(property_fields(r)) << '\n';
  }
  if (!f) throw IoError("failed writing training.csv");
  open_out(dir / "config.ini") << config_to_string(c);
  out << "wrote " << latents.size() << " samples to " << (dir / "training.csv").string() << '\n';
  return exit_code::kSuccess;
}

int cmd_optimise(const CommonOptions& o, std::ostream& out, std::ostream& err) {
  RunConfig c = load_config(o);
  // The surrogate needs two points; sampling alone accepts one.
  if (c.n_init < 2) throw ConfigError("optimise needs n_init of at least 2");
  const fs::path dir = prepare_dir(c.output_dir);
  const fs::path snapshots = dir / "snapshots";
  if (c.snapshot_interval > 0) prepare_dir(snapshots);
  open_out(dir / "config.ini") << config_to_string(c);

  auto source = c.make_source();
  MicrostructureProblem problem(*source, c.objective, c.solver);

  auto jsonl = open_out(dir / "trace.jsonl");
  auto csv = open_out(dir / "trace.csv");
  auto timings = open_out(dir / "timings.csv");
  csv << trace_csv_header() << '\n';
  timings << timings_csv_header() << '\n';

  LoopConfig loop = c.loop_config();
  loop.on_record = [&](const TraceRecord& r) {
    jsonl << trace_record_json(r) << '\n' << std::flush;
    csv << trace_csv_row(r) << '\n' << std::flush;
    timings << timings_csv_row(r) << '\n' << std::flush;
    if (r.kind == RecordKind::Iteration && c.snapshot_interval > 0 && r.iteration % c.snapshot_interval == 0) {
      write_volume(source->generate(r.z), snapshots / ("iter_" + pad(r.iteration) + ".raw"), VolumeFormat::RawU8);
    }
    if (r.kind == RecordKind::Iteration && !r.ok) err << "warning: iteration " << r.iteration << ": " << r.error << '\n';
  };
  loop.on_model = [&](int, const GPModel& m) {
    auto f = open_out(dir / "gp_final.txt");
    m.save(f);
  };

  const OptimisationTrace trace = run_loop(problem, c.design, loop);
  if (!jsonl || !csv || !timings) throw IoError("failed writing trace files");

  // Persist the frozen normalisation so the run can be repeated exactly.
  c.objective = problem.objective();
  open_out(dir / "config.ini") << config_to_string(c);

  const auto best = trace.best_index();
  if (best) {
    write_volume(source->generate(trace.records[*best].z), dir / "best.raw", VolumeFormat::RawU8);
  }

  nlohmann::ordered_json meta;
  meta["program"] = "microforge";
  meta["version"] = "0.1.0";
  meta["command"] = "optimise";
  meta["seed"] = c.seed;
  meta["generator_seed"] = c.generator.seed;
  meta["threads"] = c.solver.threads;
  meta["objective"] = std::string(objective_name(c.objective.kind));
  meta["n_init"] = c.n_init;
  meta["i_tot"] = c.i_tot;
  meta["completed_iterations"] = trace.completed_iterations;
  meta["stopped_early"] = trace.stopped_early;
  meta["records"] = trace.records.size();
  if (best) {
    meta["best_index"] = *best;
    meta["best_objective"] = trace.records[*best].objective;
  } else {
    meta["best_index"] = nullptr;
    meta["best_objective"] = nullptr;
  }
  open_out(dir / "run.json") << meta.dump(2) << '\n';

  out << "completed " << trace.completed_iterations << " iterations";
  if (best) out << "; best objective " << text::format_double(trace.records[*best].objective) << " at record " << *best;
  out << '\n';
  return exit_code::kSuccess;
}

int cmd_props(const CommonOptions& o, const std::string& volume, const std::string& format, std::ostream& out,
              std::ostream&) {
  const RunConfig c = load_config(o);
  const Microstructure m = read_volume(volume, parse_volume_format(format));
  const PropertyReport r = evaluate_all(m, c.solver);
  const std::string record = join_fields(property_columns()) + '\n' + join_fields(property_fields(r)) + '\n';
  out << record;
  if (!o.out.empty()) open_out(prepare_dir(o.out) / "props.csv") << record;
  return r.converged() ? exit_code::kSuccess : exit_code::kEvaluationFailure;
}

int cmd_generate(const CommonOptions& o, const std::string& z_file, int count, int batch, double radius,
                 const std::string& format, std::ostream& out, std::ostream& err) {
  const RunConfig c = load_config(o);
  if (batch < 1) throw ConfigError("--batch must be at least 1");
  if (!(radius >= 0.0)) throw ConfigError("--radius must be non-negative");
  const auto fmt = parse_volume_format(format);
  const std::size_t D = static_cast<std::size_t>(c.design.dims);

  std::vector<LatentVector> bases;
  if (!z_file.empty()) {
    auto in = open_in(z_file);
    const auto rows = read_number_rows(in);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != D) {
        throw ConfigError("latent row " + std::to_string(i) + " has " + std::to_string(rows[i].size()) +
                          " values, expected " + std::to_string(D));
      }
      bases.push_back(checked_latent(rows[i], i, err));
    }
  } else {
    if (count < 1) throw ConfigError("--count must be at least 1");
    Rng rng(c.seed);
    for (int i = 0; i < count; ++i) {
      std::vector<double> v(D);
      for (auto& x : v) x = rng.normal();
      bases.push_back(checked_latent(std::move(v), static_cast<std::size_t>(i), err));
    }
  }

  const fs::path dir = prepare_dir(c.output_dir);
  auto source = c.make_source();
  auto summary = open_out(dir / "generated.csv");
  summary << "file,base,member,phi_pore,phi_nmc,phi_cbd," << latent_header(D) << '\n';
  int written = 0;
  for (std::size_t b = 0; b < bases.size(); ++b) {
    const auto members = latent_ball_samples(bases[b], batch, radius, derive_seed(c.seed, 3, static_cast<std::int64_t>(b)));
    for (std::size_t k = 0; k < members.size(); ++k) {
      const Microstructure m = source->generate(members[k]);
      const std::string name = "volume_" + pad(static_cast<int>(b)) + "_" + pad(static_cast<int>(k)) +
                               (fmt == VolumeFormat::RawU8 ? ".raw" : "");
      write_volume(m, dir / name, fmt);
      const auto phi = volume_fractions(m);
      summary << name << ',' << b << ',' << k;
      for (Phase p : kAllPhases) summary << ',' << text::format_double(phi[p]);
      summary << ',' << latent_row(members[k]) << '\n';
      ++written;
    }
  }
  if (!summary) throw IoError("failed writing generated.csv");
  out << "wrote " << written << " volume(s) to " << dir.string() << '\n';
  return exit_code::kSuccess;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Table read_csv(const fs::path& p) {
  auto in = open_in(p);
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty CSV " + p.string());
  for (auto c : text::split(text::trim(line), ',')) t.header.emplace_back(c);
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    std::vector<std::string> row;
    for (auto c : text::split(text::trim(line), ',')) row.emplace_back(c);
    if (row.size() != t.header.size()) throw ConfigError("ragged CSV row in " + p.string());
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_pca(const fs::path& dir, const Eigen::MatrixXd& Z, const std::vector<std::string>& extra_header,
               const std::vector<std::vector<std::string>>& extra) {
  const PcaResult r = pca(Z);
  auto f = open_out(dir / "pca.csv");
  f << "row,pc1,pc2";
  for (const auto& h : extra_header) f << ',' << h;
  f << '\n';
  const Eigen::Index k = std::min<Eigen::Index>(2, r.scores.cols());
  for (Eigen::Index i = 0; i < r.scores.rows(); ++i) {
    f << i << ',' << text::format_double(r.scores(i, 0)) << ','
      << (k > 1 ? text::format_double(r.scores(i, 1)) : std::string("0"));
    for (const auto& v : extra[static_cast<std::size_t>(i)]) f << ',' << v;
    f << '\n';
  }
  auto s = open_out(dir / "pca_components.csv");
  s << "component,eigenvalue,explained_variance\n";
  for (Eigen::Index c = 0; c < r.eigenvalues.size(); ++c) {
    s << c + 1 << ',' << text::format_double(r.eigenvalues[c]) << ',' << text::format_double(r.explained[c]) << '\n';
  }
}

int cmd_analyse(const CommonOptions& o, const std::string& trace_path, const std::string& training_path,
                std::ostream& out, std::ostream&) {
  if (trace_path.empty() == training_path.empty()) throw ConfigError("analyse needs exactly one of --trace or --training");
  const fs::path dir = prepare_dir(o.out.empty() ? fs::path("analysis") : fs::path(o.out));

  if (!training_path.empty()) {
    const Table t = read_csv(training_path);
    std::vector<std::size_t> zcols, other;
    for (std::size_t i = 0; i < t.header.size(); ++i) {
      const auto& h = t.header[i];
      const bool latent = h.size() > 1 && h[0] == 'z' && h.find_first_not_of("0123456789", 1) == std::string::npos;
      (latent ? zcols : other).push_back(i);
    }
    if (zcols.empty()) throw ConfigError("training set has no z columns");
    Eigen::MatrixXd Z(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(zcols.size()));
    std::vector<std::vector<std::string>> extra;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      for (std::size_t j = 0; j < zcols.size(); ++j) {
        Z(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = text::parse_double(t.rows[r][zcols[j]]);
      }
      std::vector<std::string> e;
      for (auto i : other) e.push_back(t.rows[r][i]);
      extra.push_back(std::move(e));
    }
    std::vector<std::string> header;
    for (auto i : other) header.push_back(t.header[i]);
    write_pca(dir, Z, header, extra);
    out << "wrote PCA of " << t.rows.size() << " training rows to " << dir.string() << '\n';
    return exit_code::kSuccess;
  }

  auto in = open_in(trace_path);
  const auto records = read_trace_jsonl(in);
  if (records.empty()) throw ConfigError("trace " + trace_path + " is empty");

  {
    auto f = open_out(dir / "best_so_far.csv");
    f << "index,kind,iteration,objective,best_so_far\n";
    for (const auto& r : records) {
      f << r.index << ',' << (r.kind == RecordKind::Design ? "design" : "iteration") << ',' << r.iteration << ','
        << (std::isnan(r.objective) ? std::string() : text::format_double(r.objective)) << ','
        << (std::isnan(r.best_so_far) ? std::string() : text::format_double(r.best_so_far)) << '\n';
    }
  }

  std::vector<std::vector<std::string>> extra;
  for (const auto& r : records) {
    std::vector<std::string> e{r.kind == RecordKind::Design ? "design" : "iteration",
                               std::isnan(r.objective) ? std::string() : text::format_double(r.objective)};
    if (r.report) {
      for (auto& v : property_fields(*r.report)) e.push_back(std::move(v));
    } else {
      e.resize(2 + property_columns().size());
    }
    extra.push_back(std::move(e));
  }
  std::vector<std::string> header{"kind", "objective"};
  for (const auto& h : property_columns()) header.push_back(h);
  if (records.size() >= 2) write_pca(dir, latent_matrix(records), header, extra);

  // Slice profiles of the best design point and the best overall record.
  if (!o.config.empty()) {
    const RunConfig c = load_config(o);
    if (c.objective.kind == ObjectiveKind::GradedProfile) {
      std::optional<std::size_t> design_best, overall_best;
      for (std::size_t i = 0; i < records.size(); ++i) {
        if (!records[i].ok) continue;
        if (records[i].kind == RecordKind::Design &&
            (!design_best || records[i].objective > records[*design_best].objective)) {
          design_best = i;
        }
        if (!overall_best || records[i].objective > records[*overall_best].objective) overall_best = i;
      }
      if (design_best && overall_best) {
        auto source = c.make_source();
        const auto& g = c.objective.graded;
        const auto a = slice_profile(source->generate(records[*design_best].z), g.phase, g.axis);
        const auto b = slice_profile(source->generate(records[*overall_best].z), g.phase, g.axis);
        const auto target = graded_target(g, c.generator.output_dims);
        auto f = open_out(dir / "slice_profiles.csv");
        f << "slice,target,initial_best,final_best\n";
        for (std::size_t j = 0; j < target.size(); ++j) {
          f << j << ',' << text::format_double(target[j]) << ',' << text::format_double(a[j]) << ','
            << text::format_double(b[j]) << '\n';
        }
      }
    }
  }
  out << "wrote analysis of " << records.size() << " trace records to " << dir.string() << '\n';
  return exit_code::kSuccess;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Closed-loop design of three-phase electrode microstructures", "microforge"};
  app.require_subcommand(1);

  CommonOptions common;
  std::uint64_t seed = 0;
  int threads = 1;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "Run configuration file");
    sub->add_option("--seed", seed, "Override the loop seed");
    sub->add_option("--threads", threads, "Property-evaluation threads (1 is deterministic)")->check(CLI::PositiveNumber);
    sub->add_option("--out", common.out, "Output directory");
  };

  auto* sample = app.add_subcommand("sample", "Evaluate the initial Latin-hypercube design");
  auto* optimise = app.add_subcommand("optimise", "Run the Bayesian-optimisation loop");
  auto* props = app.add_subcommand("props", "Compute the property report of one volume");
  auto* generate = app.add_subcommand("generate", "Generate volumes from latent vectors");
  auto* analyse = app.add_subcommand("analyse", "Export plot-ready tables from a trace or training set");
  for (auto* s : {sample, optimise, props, generate, analyse}) add_common(s);

  std::string volume, volume_format = "raw-u8";
  props->add_option("--volume", volume, "Volume file (raw-u8) or directory (csv-slices)")->required();
  props->add_option("--format", volume_format, "raw-u8 or csv-slices");

  std::string z_file, out_format = "raw-u8";
  int count = 1, batch = 1;
  double radius = 0.0;
  generate->add_option("--z-file", z_file, "Latent rows (comma or whitespace separated)");
  generate->add_option("--count", count, "Number of N(0,1) latents when no z-file is given");
  generate->add_option("--batch", batch, "Volumes per latent: the latent plus batch-1 perturbations");
  generate->add_option("--radius", radius, "Perturbation radius");
  generate->add_option("--format", out_format, "raw-u8 or csv-slices");

  std::string trace_path, training_path;
  analyse->add_option("--trace", trace_path, "trace.jsonl of an optimise run");
  analyse->add_option("--training", training_path, "training.csv of a sample run");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return exit_code::kSuccess;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_code::kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kConfigError;
  }

  CLI::App* active = app.get_subcommands().front();
  if (active->count("--seed")) common.seed = seed;
  if (active->count("--threads")) common.threads = threads;

  try {
    if (active == sample) return cmd_sample(common, out, err);
    if (active == optimise) return cmd_optimise(common, out, err);
    if (active == props) return cmd_props(common, volume, volume_format, out, err);
    if (active == generate) return cmd_generate(common, z_file, count, batch, radius, out_format, out, err);
    return cmd_analyse(common, trace_path, training_path, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return exit_code::kConfigError;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return exit_code::kIoError;
  } catch (const VolumeError& e) {
    err << (e.kind() == VolumeError::Kind::Io ? "i/o error: " : "volume error: ") << e.what() << '\n';
    return exit_code::kIoError;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << '\n';
    return exit_code::kIoError;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return exit_code::kConfigError;
  } catch (const std::exception& e) {
    err << "evaluation failure: " << e.what() << '\n';
    return exit_code::kEvaluationFailure;
  }
}

}  // namespace microforge
