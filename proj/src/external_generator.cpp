#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include "microforge/genlat.hpp"
#include "microforge/text.hpp"

extern char** environ;

namespace microforge {

namespace {

std::vector<std::string> split_command(const std::string& command) {
  std::vector<std::string> out;
  std::istringstream is(command);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::filesystem::path make_job_dir(const std::filesystem::path& root) {
  static std::atomic<unsigned long> counter{0};
  const auto base = root.empty() ? std::filesystem::temp_directory_path() / "microforge-jobs" : root;
  std::filesystem::create_directories(base);
  while (true) {
    const auto dir = base / ("job-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    if (std::filesystem::create_directory(dir)) return dir;
  }
}

std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct JobGuard {
  std::filesystem::path dir;
  bool keep;
  ~JobGuard() {
    if (!keep) {
      std::error_code ec;
      std::filesystem::remove_all(dir, ec);
    }
  }
};

// Runs argv with stdout/stderr captured into files under `job`. Returns the
// exit status, or throws on spawn failure / timeout.
int run_process(const std::vector<std::string>& argv, const std::filesystem::path& job,
                std::chrono::milliseconds timeout) {
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  const auto out_path = (job / "stdout.log").string();
  const auto err_path = (job / "stderr.log").string();
  posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, out_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawn_file_actions_addopen(&actions, STDERR_FILENO, err_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);

  std::vector<char*> cargv;
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);

  pid_t pid = 0;
  const int rc = posix_spawnp(&pid, cargv[0], &actions, nullptr, cargv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) {
    throw ExternalGeneratorError(ExternalGeneratorError::Kind::ProcessFailure,
                                 "cannot start '" + argv[0] + "': " + std::strerror(rc));
  }

  const auto deadline = std::chrono::steady_clock::now() + timeout;
  int status = 0;
  while (true) {
    const pid_t r = ::waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0 && errno != EINTR) {
      throw ExternalGeneratorError(ExternalGeneratorError::Kind::ProcessFailure, "waitpid failed");
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      ::kill(pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      throw ExternalGeneratorError(ExternalGeneratorError::Kind::Timeout,
                                   "external generator timed out after " + std::to_string(timeout.count()) + " ms");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
}

}  // namespace

void write_latent_file(const std::filesystem::path& path, const LatentVector& z, Dims dims) {
  std::ofstream out(path);
  for (double v : z.values()) out << text::format_double(v) << '\n';
  out << "dims=" << dims.nx << ',' << dims.ny << ',' << dims.nz << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

Microstructure external_generate(const LatentVector& z, Dims dims, const ExternalGeneratorEndpoint& endpoint) {
  auto argv = split_command(endpoint.command);
  if (argv.empty()) {
    throw ExternalGeneratorError(ExternalGeneratorError::Kind::ProcessFailure, "empty generator command");
  }
  const JobGuard job{make_job_dir(endpoint.work_root), endpoint.keep_jobs};
  write_latent_file(job.dir / "z.txt", z, dims);
  argv.push_back(job.dir.string());

  const int code = run_process(argv, job.dir, endpoint.timeout);
  if (code != 0) {
    throw ExternalGeneratorError(ExternalGeneratorError::Kind::ProcessFailure,
                                 "external generator exited with status " + std::to_string(code) + ": " +
                                     std::string(text::trim(read_all(job.dir / "stderr.log"))));
  }
  try {
    auto m = read_volume(job.dir / "volume.raw", VolumeFormat::RawU8);
    if (m.dims() != dims) {
      throw ExternalGeneratorError(ExternalGeneratorError::Kind::MalformedVolume,
                                   "external volume has dims " + to_string(m.dims()) + ", expected " + to_string(dims));
    }
    return m;
  } catch (const VolumeError& e) {
    const auto kind = e.kind() == VolumeError::Kind::InvalidLabel ? ExternalGeneratorError::Kind::InvalidLabel
                                                                  : ExternalGeneratorError::Kind::MalformedVolume;
    throw ExternalGeneratorError(kind, std::string("external volume rejected: ") + e.what());
  }
}

ExternalGenerator::ExternalGenerator(ExternalGeneratorEndpoint endpoint, Dims output_dims)
    : endpoint_(std::move(endpoint)), dims_(output_dims) {}

Microstructure ExternalGenerator::generate(const LatentVector& z) {
  if (endpoint_.concurrency_safe) return external_generate(z, dims_, endpoint_);
  std::lock_guard lock(mutex_);
  return external_generate(z, dims_, endpoint_);
}

}  // namespace microforge
