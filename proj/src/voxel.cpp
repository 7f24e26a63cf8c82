#include "microforge/voxel.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "microforge/text.hpp"

namespace microforge {

namespace {

constexpr std::string_view kPhaseCoding = "pore:0,nmc:1,cbd:2";

void validate_dims(const Dims& d) {
  if (d.nx <= 0 || d.ny <= 0 || d.nz <= 0) {
    throw std::invalid_argument("microstructure dimensions must be positive, got " + to_string(d));
  }
}

std::string header_text(const Microstructure& m) {
  std::ostringstream os;
  os << "nx=" << m.dims().nx << '\n'
     << "ny=" << m.dims().ny << '\n'
     << "nz=" << m.dims().nz << '\n'
     << "voxel_size_um=" << text::format_double(m.voxel_size()) << '\n'
     << "phase_coding=" << kPhaseCoding << '\n';
  return os.str();
}

struct Header {
  Dims dims;
  double voxel_size = kDefaultVoxelSizeUm;
};

Header read_header(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw VolumeError(VolumeError::Kind::Io, "cannot open header " + path.string());
  std::map<std::string, std::string, std::less<>> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw VolumeError(VolumeError::Kind::MalformedHeader, "header line without '=': " + std::string(t));
    }
    kv[std::string(text::trim(t.substr(0, eq)))] = std::string(text::trim(t.substr(eq + 1)));
  }
  Header h;
  try {
    for (const char* key : {"nx", "ny", "nz"}) {
      if (!kv.contains(key)) {
        throw VolumeError(VolumeError::Kind::MalformedHeader,
                          std::string("header is missing '") + key + "' in " + path.string());
      }
    }
    h.dims = {text::parse_int<int>(kv["nx"]), text::parse_int<int>(kv["ny"]), text::parse_int<int>(kv["nz"])};
    if (kv.contains("voxel_size_um")) h.voxel_size = text::parse_double(kv["voxel_size_um"]);
  } catch (const std::invalid_argument& e) {
    throw VolumeError(VolumeError::Kind::MalformedHeader, std::string("bad header value: ") + e.what());
  }
  if (kv.contains("phase_coding") && kv["phase_coding"] != kPhaseCoding) {
    throw VolumeError(VolumeError::Kind::MalformedHeader, "unsupported phase coding '" + kv["phase_coding"] + "'");
  }
  if (h.dims.nx <= 0 || h.dims.ny <= 0 || h.dims.nz <= 0 || !(h.voxel_size > 0.0)) {
    throw VolumeError(VolumeError::Kind::MalformedHeader, "non-positive dimensions or voxel size in " + path.string());
  }
  return h;
}

Phase checked_label(long long value, std::size_t offset) {
  if (value < 0 || value > 2) {
    throw VolumeError(VolumeError::Kind::InvalidLabel,
                      "invalid label " + std::to_string(value) + " at offset " + std::to_string(offset));
  }
  return static_cast<Phase>(value);
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  out << contents;
  if (!out) throw VolumeError(VolumeError::Kind::Io, "cannot write " + path.string());
}

std::filesystem::path slice_path(const std::filesystem::path& dir, int z) {
  char name[32];
  std::snprintf(name, sizeof(name), "slice_%04d.csv", z);
  return dir / name;
}

}  // namespace

std::string_view phase_name(Phase p) noexcept {
  switch (p) {
    case Phase::Pore: return "pore";
    case Phase::NMC: return "nmc";
    case Phase::CBD: return "cbd";
  }
  return "?";
}

Phase parse_phase(std::string_view name) {
  for (Phase p : kAllPhases) {
    if (phase_name(p) == name) return p;
  }
  throw std::invalid_argument("unknown phase '" + std::string(name) + "' (expected pore, nmc or cbd)");
}

std::string_view axis_name(Axis a) noexcept {
  switch (a) {
    case Axis::X: return "x";
    case Axis::Y: return "y";
    case Axis::Z: return "z";
  }
  return "?";
}

Axis parse_axis(std::string_view name) {
  for (Axis a : kAllAxes) {
    if (axis_name(a) == name) return a;
  }
  throw std::invalid_argument("unknown axis '" + std::string(name) + "' (expected x, y or z)");
}

std::string to_string(const Dims& d) {
  return std::to_string(d.nx) + "x" + std::to_string(d.ny) + "x" + std::to_string(d.nz);
}

Microstructure::Microstructure(Dims dims, double voxel_size_um, std::vector<Phase> labels)
    : dims_(dims), voxel_size_(voxel_size_um), labels_(std::move(labels)) {
  validate_dims(dims_);
  if (!(voxel_size_ > 0.0)) throw std::invalid_argument("voxel size must be positive");
  if (labels_.size() != dims_.count()) {
    throw VolumeError(VolumeError::Kind::DimensionMismatch,
                      "label count " + std::to_string(labels_.size()) + " does not match " + to_string(dims_));
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    checked_label(static_cast<long long>(labels_[i]), i);
  }
}

Microstructure::Microstructure(Dims dims, double voxel_size_um, Phase fill)
    : Microstructure(dims, voxel_size_um, std::vector<Phase>(dims.nx > 0 && dims.ny > 0 && dims.nz > 0 ? dims.count() : 0, fill)) {}

std::array<std::size_t, kPhaseCount> phase_counts(const Microstructure& m) {
  std::array<std::size_t, kPhaseCount> counts{};
  for (Phase p : m.labels()) ++counts[static_cast<std::size_t>(code(p))];
  return counts;
}

PhaseFractions volume_fractions(const Microstructure& m) {
  const auto counts = phase_counts(m);
  const double total = static_cast<double>(m.size());
  PhaseFractions f;
  for (std::size_t i = 0; i < counts.size(); ++i) f.values[i] = static_cast<double>(counts[i]) / total;
  return f;
}

std::vector<double> slice_profile(const Microstructure& m, Phase p, Axis axis) {
  const auto& d = m.dims();
  const int n = d.extent(axis);
  std::vector<std::size_t> counts(static_cast<std::size_t>(n), 0);
  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x) {
        if (m.at(x, y, z) != p) continue;
        const int j = axis == Axis::X ? x : (axis == Axis::Y ? y : z);
        ++counts[static_cast<std::size_t>(j)];
      }
    }
  }
  const double plane = static_cast<double>(m.size()) / static_cast<double>(n);
  std::vector<double> profile(counts.size());
  std::transform(counts.begin(), counts.end(), profile.begin(),
                 [plane](std::size_t c) { return static_cast<double>(c) / plane; });
  return profile;
}

VolumeFormat parse_volume_format(std::string_view name) {
  if (name == "raw-u8" || name == "raw") return VolumeFormat::RawU8;
  if (name == "csv-slices" || name == "csv") return VolumeFormat::CsvSlices;
  throw std::invalid_argument("unknown volume format '" + std::string(name) + "'");
}

std::filesystem::path header_path_for(const std::filesystem::path& raw_path) {
  auto p = raw_path;
  p.replace_extension(".hdr");
  return p;
}

void write_volume(const Microstructure& m, const std::filesystem::path& path, VolumeFormat format) {
  if (format == VolumeFormat::RawU8) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    write_text_file(header_path_for(path), header_text(m));
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(m.labels().data()), static_cast<std::streamsize>(m.size()));
    if (!out) throw VolumeError(VolumeError::Kind::Io, "cannot write " + path.string());
    return;
  }
  std::filesystem::create_directories(path);
  write_text_file(path / "header.hdr", header_text(m));
  const auto& d = m.dims();
  for (int z = 0; z < d.nz; ++z) {
    std::string body;
    body.reserve(static_cast<std::size_t>(d.nx * d.ny * 2));
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x) {
        if (x > 0) body.push_back(',');
        body.push_back(static_cast<char>('0' + code(m.at(x, y, z))));
      }
      body.push_back('\n');
    }
    write_text_file(slice_path(path, z), body);
  }
}

Microstructure read_volume(const std::filesystem::path& path, VolumeFormat format) {
  if (format == VolumeFormat::RawU8) {
    const Header h = read_header(header_path_for(path));
    std::ifstream in(path, std::ios::binary);
    if (!in) throw VolumeError(VolumeError::Kind::Io, "cannot open volume " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() != h.dims.count()) {
      throw VolumeError(VolumeError::Kind::DimensionMismatch,
                        "payload has " + std::to_string(bytes.size()) + " bytes but header declares " +
                            to_string(h.dims) + " = " + std::to_string(h.dims.count()));
    }
    std::vector<Phase> labels(bytes.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
      labels[i] = checked_label(static_cast<unsigned char>(bytes[i]), i);
    }
    return Microstructure(h.dims, h.voxel_size, std::move(labels));
  }

  const Header h = read_header(path / "header.hdr");
  const auto& d = h.dims;
  std::vector<Phase> labels(d.count());
  for (int z = 0; z < d.nz; ++z) {
    const auto file = slice_path(path, z);
    std::ifstream in(file);
    if (!in) {
      throw VolumeError(VolumeError::Kind::DimensionMismatch, "missing slice file " + file.string());
    }
    std::string line;
    int y = 0;
    while (std::getline(in, line)) {
      if (text::trim(line).empty()) continue;
      if (y >= d.ny) throw VolumeError(VolumeError::Kind::DimensionMismatch, "too many rows in " + file.string());
      const auto cells = text::split(text::trim(line), ',');
      if (cells.size() != static_cast<std::size_t>(d.nx)) {
        throw VolumeError(VolumeError::Kind::DimensionMismatch,
                          "row " + std::to_string(y) + " of " + file.string() + " has " +
                              std::to_string(cells.size()) + " columns, expected " + std::to_string(d.nx));
      }
      for (int x = 0; x < d.nx; ++x) {
        const std::size_t offset =
            (static_cast<std::size_t>(z) * static_cast<std::size_t>(d.ny) + static_cast<std::size_t>(y)) *
                static_cast<std::size_t>(d.nx) +
            static_cast<std::size_t>(x);
        long long value = 0;
        try {
          value = text::parse_int(cells[static_cast<std::size_t>(x)]);
        } catch (const std::invalid_argument&) {
          throw VolumeError(VolumeError::Kind::InvalidLabel, "non-integer label at offset " + std::to_string(offset));
        }
        labels[offset] = checked_label(value, offset);
      }
      ++y;
    }
    if (y != d.ny) {
      throw VolumeError(VolumeError::Kind::DimensionMismatch,
                        file.string() + " has " + std::to_string(y) + " rows, expected " + std::to_string(d.ny));
    }
  }
  if (std::filesystem::exists(slice_path(path, d.nz))) {
    throw VolumeError(VolumeError::Kind::DimensionMismatch, "more slice files than nz=" + std::to_string(d.nz));
  }
  return Microstructure(d, h.voxel_size, std::move(labels));
}

}  // namespace microforge
