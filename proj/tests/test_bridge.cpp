#include <doctest.h>

#include <chrono>
#include <fstream>
#include <sstream>

#include "microforge/genlat.hpp"
#include "microforge/rng.hpp"
#include "support.hpp"

using namespace microforge;
using microforge::test::TempDir;

namespace {

const std::filesystem::path kFixtures = MICROFORGE_FIXTURE_DIR;

ExternalGeneratorEndpoint endpoint(const std::string& command, const std::filesystem::path& root) {
  ExternalGeneratorEndpoint e;
  e.command = command;
  e.work_root = root;
  e.timeout = std::chrono::seconds(20);
  return e;
}

ExternalGeneratorError::Kind failure_kind(const LatentVector& z, Dims d, const ExternalGeneratorEndpoint& e,
                                          std::string* message = nullptr) {
  try {
    external_generate(z, d, e);
  } catch (const ExternalGeneratorError& err) {
    if (message) *message = err.what();
    return err.kind();
  }
  FAIL("expected ExternalGeneratorError");
  return ExternalGeneratorError::Kind::ProcessFailure;
}

// Re-implementation of tile_generator.py.
Microstructure tile_oracle(const LatentVector& z, Dims d) {
  const int lx = d.nx / 16, ly = d.ny / 16;
  std::vector<Phase> labels(d.count());
  std::size_t i = 0;
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int x = 0; x < d.nx; ++x) {
        const double v = z[static_cast<std::size_t>((k / 16) * ly * lx + (j / 16) * lx + x / 16)];
        labels[i++] = v < -1.0 ? Phase::Pore : (v > 1.0 ? Phase::CBD : Phase::NMC);
      }
  return Microstructure(d, 0.4, std::move(labels));
}

std::size_t entries(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir)) return 0;
  return static_cast<std::size_t>(std::distance(std::filesystem::directory_iterator(dir), {}));
}

}  // namespace

TEST_CASE("latent file layout") {
  TempDir tmp;
  write_latent_file(tmp / "z.txt", LatentVector({0.25, -1.5, 3.0}), Dims{16, 16, 48});
  std::ifstream in(tmp / "z.txt");
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == "0.25\n-1.5\n3\ndims=16,16,48\n");
}

TEST_CASE("echo generator returns the stored volume") {
  TempDir tmp;
  GeneratorConfig cfg;
  cfg.output_dims = {32, 32, 32};
  const auto stored = generate(LatentVector(std::vector<double>(8, 0.2)), cfg);
  write_volume(stored, tmp / "stored.raw", VolumeFormat::RawU8);
  const auto e = endpoint((kFixtures / "echo_generator.sh").string() + " " + (tmp / "stored.raw").string(),
                          tmp / "jobs");
  const auto got = external_generate(LatentVector(std::vector<double>(8, 0.0)), cfg.output_dims, e);
  CHECK(got == stored);
  CHECK(entries(tmp / "jobs") == 0);
}

TEST_CASE("job directories are kept on request") {
  TempDir tmp;
  const Microstructure stored(Dims{16, 16, 16}, 0.4, Phase::NMC);
  write_volume(stored, tmp / "stored.raw", VolumeFormat::RawU8);
  auto e = endpoint((kFixtures / "echo_generator.sh").string() + " " + (tmp / "stored.raw").string(), tmp / "jobs");
  e.keep_jobs = true;
  external_generate(LatentVector({1.0}), stored.dims(), e);
  REQUIRE(entries(tmp / "jobs") == 1);
  const auto job = std::filesystem::directory_iterator(tmp / "jobs")->path();
  CHECK(std::filesystem::exists(job / "z.txt"));
  CHECK(std::filesystem::exists(job / "volume.raw"));
}

TEST_CASE("nonzero exit is a process failure carrying stderr") {
  TempDir tmp;
  std::string msg;
  const auto kind = failure_kind(LatentVector({0.0}), Dims{16, 16, 16},
                                 endpoint((kFixtures / "failing_generator.sh").string(), tmp.path()), &msg);
  CHECK(kind == ExternalGeneratorError::Kind::ProcessFailure);
  CHECK(msg.find("checkpoint not found") != std::string::npos);
  CHECK(msg.find("status 7") != std::string::npos);
}

TEST_CASE("missing executable is a process failure") {
  TempDir tmp;
  CHECK(failure_kind(LatentVector({0.0}), Dims{16, 16, 16}, endpoint("/nonexistent/generator", tmp.path())) ==
        ExternalGeneratorError::Kind::ProcessFailure);
  CHECK(failure_kind(LatentVector({0.0}), Dims{16, 16, 16}, endpoint("   ", tmp.path())) ==
        ExternalGeneratorError::Kind::ProcessFailure);
}

TEST_CASE("wrong dims are a malformed volume") {
  TempDir tmp;
  std::string msg;
  CHECK(failure_kind(LatentVector({0.0}), Dims{16, 16, 16},
                     endpoint((kFixtures / "wrong_dims_generator.sh").string(), tmp.path()), &msg) ==
        ExternalGeneratorError::Kind::MalformedVolume);
  CHECK(msg.find("2x2x2") != std::string::npos);
}

TEST_CASE("labels outside {0,1,2} are rejected") {
  TempDir tmp;
  CHECK(failure_kind(LatentVector({0.0}), Dims{2, 2, 2},
                     endpoint((kFixtures / "bad_label_generator.sh").string(), tmp.path())) ==
        ExternalGeneratorError::Kind::InvalidLabel);
}

TEST_CASE("a process that does not finish in time is killed") {
  TempDir tmp;
  auto e = endpoint((kFixtures / "slow_generator.sh").string(), tmp.path());
  e.timeout = std::chrono::milliseconds(300);
  const auto t0 = std::chrono::steady_clock::now();
  CHECK(failure_kind(LatentVector({0.0}), Dims{16, 16, 16}, e) == ExternalGeneratorError::Kind::Timeout);
  CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(5));
}

TEST_CASE("tile generator round-trips the latent through the protocol") {
  TempDir tmp;
  const Dims d{32, 32, 16};
  Rng rng(5);
  std::vector<double> v(4);
  for (auto& x : v) x = rng.uniform(-3.0, 3.0);
  const LatentVector z(v);
  ExternalGenerator gen(endpoint((kFixtures / "tile_generator.py").string(), tmp.path()), d);
  CHECK(gen.latent_size() == 4);
  const auto got = gen.generate(z);
  CHECK(got == tile_oracle(z, d));
  CHECK(gen.generate(z) == got);
}

TEST_CASE("a generator failure on malformed input surfaces its exit status") {
  TempDir tmp;
  // Latent length 3 does not match 16^3 dims (1 cell); the double exits 3.
  std::string msg;
  CHECK(failure_kind(LatentVector({0.0, 1.0, 2.0}), Dims{16, 16, 16},
                     endpoint((kFixtures / "tile_generator.py").string(), tmp.path()), &msg) ==
        ExternalGeneratorError::Kind::ProcessFailure);
  CHECK(msg.find("status 3") != std::string::npos);
}
