#include "rfs/imgvol.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "rfs/error.hpp"
#include "rfs/io.hpp"

namespace rfs::imgvol {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "raw payload decoding assumes a little-endian host");

VoxelVolume::VoxelVolume(Dims dims, Spacing spacing, std::vector<double> intensities)
    : dims_(dims), spacing_(spacing), hu_(std::move(intensities)) {
  if (dims_.nx <= 0 || dims_.ny <= 0 || dims_.nz <= 0)
    throw DataError("volume dims must be positive");
  if (!(spacing_.x > 0 && spacing_.y > 0 && spacing_.z > 0))
    throw DataError("nonpositive spacing");
  if (hu_.size() != dims_.count()) throw DataError("size mismatch between dims and intensities");
}

RoiMask::RoiMask(Dims dims, std::vector<std::uint8_t> voxels)
    : dims_(dims), voxels_(std::move(voxels)) {
  if (dims_.nx <= 0 || dims_.ny <= 0 || dims_.nz <= 0)
    throw DataError("mask dims must be positive");
  if (voxels_.size() != dims_.count()) throw DataError("size mismatch between dims and mask");
  for (auto& v : voxels_) {
    if (v > 1) throw DataError("mask values must be 0 or 1");
  }
}

std::size_t RoiMask::count() const {
  return static_cast<std::size_t>(std::count(voxels_.begin(), voxels_.end(), std::uint8_t{1}));
}

std::size_t DiscretizedRoi::voxel_count() const {
  return static_cast<std::size_t>(
      std::count_if(levels.begin(), levels.end(), [](int l) { return l > 0; }));
}

std::string to_string(DType dtype) {
  switch (dtype) {
    case DType::Int16: return "int16";
    case DType::Float32: return "float32";
    case DType::UInt8: return "uint8";
  }
  return "unknown";
}

DType dtype_from_string(const std::string& name) {
  if (name == "int16") return DType::Int16;
  if (name == "float32") return DType::Float32;
  if (name == "uint8") return DType::UInt8;
  throw DataError("unsupported dtype '" + name + "'");
}

namespace {

std::size_t dtype_size(DType d) {
  switch (d) {
    case DType::Int16: return 2;
    case DType::Float32: return 4;
    case DType::UInt8: return 1;
  }
  return 0;
}

struct Sidecar {
  Dims dims;
  Spacing spacing;
  DType dtype = DType::Int16;
  fs::path data_path;
};

Sidecar read_sidecar(const fs::path& sidecar_path) {
  std::ifstream in(sidecar_path);
  if (!in) throw DataError("missing file: " + sidecar_path.string());
  json j;
  try {
    in >> j;
    Sidecar s;
    auto d = j.at("dims").get<std::vector<int>>();
    if (d.size() != 3) throw DataError("dims must have three entries");
    s.dims = {d[0], d[1], d[2]};
    if (s.dims.nx <= 0 || s.dims.ny <= 0 || s.dims.nz <= 0)
      throw DataError("dims must be positive in " + sidecar_path.string());
    auto sp = j.value("spacing_mm", std::vector<double>{1.0, 1.0, 1.0});
    if (sp.size() != 3) throw DataError("spacing_mm must have three entries");
    s.spacing = {sp[0], sp[1], sp[2]};
    if (!(s.spacing.x > 0 && s.spacing.y > 0 && s.spacing.z > 0))
      throw DataError("nonpositive spacing in " + sidecar_path.string());
    s.dtype = dtype_from_string(j.at("dtype").get<std::string>());
    auto order = j.value("byte_order", std::string("little-endian"));
    if (order != "little-endian") throw DataError("unsupported byte_order '" + order + "'");
    s.data_path = sidecar_path.parent_path() / j.at("data_file").get<std::string>();
    return s;
  } catch (const json::exception& e) {
    throw DataError("malformed sidecar " + sidecar_path.string() + ": " + e.what());
  }
}

std::vector<char> read_payload(const Sidecar& s) {
  std::ifstream in(s.data_path, std::ios::binary);
  if (!in) throw DataError("missing file: " + s.data_path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() != s.dims.count() * dtype_size(s.dtype)) {
    throw DataError("size mismatch: " + s.data_path.string() + " holds " +
                    std::to_string(bytes.size()) + " bytes, sidecar expects " +
                    std::to_string(s.dims.count() * dtype_size(s.dtype)));
  }
  return bytes;
}

void write_sidecar(const fs::path& sidecar_path, const Dims& dims, const Spacing& spacing,
                   DType dtype, const std::vector<char>& payload) {
  fs::path raw = sidecar_path;
  raw.replace_extension(".raw");
  json j;
  j["dims"] = {dims.nx, dims.ny, dims.nz};
  j["spacing_mm"] = {spacing.x, spacing.y, spacing.z};
  j["dtype"] = to_string(dtype);
  j["byte_order"] = "little-endian";
  j["data_file"] = raw.filename().string();
  io::write_file_atomic(raw, std::string(payload.begin(), payload.end()));
  io::write_file_atomic(sidecar_path, j.dump(2) + "\n");
}

}  // namespace

VoxelVolume load_volume(const fs::path& sidecar_path) {
  Sidecar s = read_sidecar(sidecar_path);
  if (s.dtype == DType::UInt8) throw DataError("volume dtype must be int16 or float32");
  auto bytes = read_payload(s);
  std::vector<double> hu(s.dims.count());
  for (std::size_t i = 0; i < hu.size(); ++i) {
    if (s.dtype == DType::Int16) {
      std::int16_t v;
      std::memcpy(&v, bytes.data() + 2 * i, 2);
      hu[i] = v;
    } else {
      float v;
      std::memcpy(&v, bytes.data() + 4 * i, 4);
      hu[i] = v;
    }
  }
  return VoxelVolume(s.dims, s.spacing, std::move(hu));
}

RoiMask load_mask(const fs::path& sidecar_path) {
  Sidecar s = read_sidecar(sidecar_path);
  if (s.dtype != DType::UInt8) throw DataError("mask dtype must be uint8");
  auto bytes = read_payload(s);
  std::vector<std::uint8_t> vox(bytes.begin(), bytes.end());
  return RoiMask(s.dims, std::move(vox));
}

void write_volume(const fs::path& sidecar_path, const VoxelVolume& volume, DType dtype) {
  const auto& hu = volume.intensities();
  std::vector<char> payload(hu.size() * dtype_size(dtype));
  for (std::size_t i = 0; i < hu.size(); ++i) {
    if (dtype == DType::Int16) {
      double r = std::round(hu[i]);
      if (r != hu[i] || r < std::numeric_limits<std::int16_t>::min() ||
          r > std::numeric_limits<std::int16_t>::max())
        throw DataError("intensity not representable as int16");
      auto v = static_cast<std::int16_t>(r);
      std::memcpy(payload.data() + 2 * i, &v, 2);
    } else if (dtype == DType::Float32) {
      auto v = static_cast<float>(hu[i]);
      std::memcpy(payload.data() + 4 * i, &v, 4);
    } else {
      throw DataError("volume dtype must be int16 or float32");
    }
  }
  write_sidecar(sidecar_path, volume.dims(), volume.spacing(), dtype, payload);
}

void write_mask(const fs::path& sidecar_path, const RoiMask& mask, const Spacing& spacing) {
  std::vector<char> payload(mask.voxels().begin(), mask.voxels().end());
  write_sidecar(sidecar_path, mask.dims(), spacing, DType::UInt8, payload);
}

RoiMask exclude_gas(const VoxelVolume& volume, const RoiMask& mask, const PreprocessConfig& cfg) {
  if (!(volume.dims() == mask.dims())) throw DataError("mask dims do not match volume");
  if (!cfg.gas_exclusion_enabled) return mask;
  std::vector<std::uint8_t> out = mask.voxels();
  bool any = false;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] && volume[i] < cfg.hu_cutoff) out[i] = 0;
    any = any || out[i];
  }
  if (!any) throw DataError("ROI vanished after gas exclusion");
  return RoiMask(mask.dims(), std::move(out));
}

DiscretizedRoi discretize(const VoxelVolume& volume, const RoiMask& mask,
                          const PreprocessConfig& cfg) {
  if (!(volume.dims() == mask.dims())) throw DataError("mask dims do not match volume");
  if (!(cfg.bin_width > 0)) throw DataError("bin_width must be positive");
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mask.voxels().size(); ++i) {
    if (mask[i]) lo = std::min(lo, volume[i]);
  }
  if (!std::isfinite(lo)) throw DataError("empty ROI");

  DiscretizedRoi roi;
  roi.dims = mask.dims();
  roi.bin_width = cfg.bin_width;
  roi.levels.assign(mask.voxels().size(), 0);
  for (std::size_t i = 0; i < roi.levels.size(); ++i) {
    if (!mask[i]) continue;
    int level = static_cast<int>(std::floor((volume[i] - lo) / cfg.bin_width)) + 1;
    roi.levels[i] = level;
    roi.num_levels = std::max(roi.num_levels, level);
  }
  return roi;
}

}  // namespace rfs::imgvol
