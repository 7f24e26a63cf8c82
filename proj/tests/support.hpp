#pragma once

// Fixture builders shared by the unit tests.

#include <array>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <string>
#include <system_error>
#include <vector>

#include "microforge/voxel.hpp"

namespace microforge::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "mf") {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Volume whose label at (x, y, z) is f(x, y, z).
inline Microstructure make_volume(Dims d, const std::function<Phase(int, int, int)>& f, double voxel = 1.0) {
  std::vector<Phase> labels(d.count());
  std::size_t i = 0;
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) labels[i++] = f(x, y, z);
  return Microstructure(d, voxel, std::move(labels));
}

/// Reorders axes: output coordinate (a, b, c) reads input at the position
/// where axis perm[0] = a, perm[1] = b, perm[2] = c.
inline Microstructure permute_axes(const Microstructure& m, std::array<int, 3> perm) {
  const auto in = m.dims().as_array();
  const Dims out{in[static_cast<std::size_t>(perm[0])], in[static_cast<std::size_t>(perm[1])],
                 in[static_cast<std::size_t>(perm[2])]};
  return make_volume(
      out,
      [&](int a, int b, int c) {
        std::array<int, 3> src{};
        src[static_cast<std::size_t>(perm[0])] = a;
        src[static_cast<std::size_t>(perm[1])] = b;
        src[static_cast<std::size_t>(perm[2])] = c;
        return m.at(src[0], src[1], src[2]);
      },
      m.voxel_size());
}

inline Microstructure mirror_x(const Microstructure& m) {
  const int nx = m.dims().nx;
  return make_volume(m.dims(), [&](int x, int y, int z) { return m.at(nx - 1 - x, y, z); }, m.voxel_size());
}

}  // namespace microforge::test
