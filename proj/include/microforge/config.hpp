#pragma once

// Run configuration: an INI-style file of `key = value` lines grouped in
// [sections]. Every numeric field is written in shortest round-trip form, so
// write -> read reproduces the configuration exactly.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include "microforge/bo.hpp"
#include "microforge/genlat.hpp"
#include "microforge/objectives.hpp"
#include "microforge/props.hpp"

namespace microforge {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class GeneratorBackend { Builtin, External };

struct RunConfig {
  GeneratorConfig generator;
  GeneratorBackend backend = GeneratorBackend::Builtin;
  ExternalGeneratorEndpoint endpoint;
  SolverConfig solver;
  DesignSpace design;  // dims follow the generator's latent size
  ObjectiveSpec objective;

  int n_init = 50;
  int i_tot = 500;
  std::uint64_t seed = 0;
  KernelKind kernel = KernelKind::Isotropic;
  int gp_starts = 5;
  int acquisition_starts = 5;
  int acquisition_screening = 256;
  bool fail_hard = false;
  int early_stop_patience = 0;  // 0 disables early stopping
  double early_stop_tolerance = 0.0;
  int snapshot_interval = 50;

  std::filesystem::path output_dir = "run";

  /// Checks ranges and cross-field consistency; throws ConfigError.
  void validate() const;
  LoopConfig loop_config() const;
  std::unique_ptr<MicrostructureSource> make_source() const;
};

RunConfig read_config(std::istream& in);
RunConfig read_config_file(const std::filesystem::path& path);
void write_config(std::ostream& out, const RunConfig& cfg);
std::string config_to_string(const RunConfig& cfg);

}  // namespace microforge
