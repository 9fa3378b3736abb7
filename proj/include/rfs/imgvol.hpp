#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace rfs::imgvol {

struct Dims {
  int nx = 0;
  int ny = 0;
  int nz = 0;

  std::size_t count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
           static_cast<std::size_t>(nz);
  }
  bool contains(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < nx && y < ny && z < nz;
  }
  // x fastest varying, then y, then z.
  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * ny + y) * nx + x;
  }
  friend bool operator==(const Dims&, const Dims&) = default;
};

struct Spacing {
  double x = 1.0;
  double y = 1.0;
  double z = 1.0;
  friend bool operator==(const Spacing&, const Spacing&) = default;
};

/// Scalar intensity grid (HU) with physical voxel spacing in millimeters.
class VoxelVolume {
 public:
  VoxelVolume() = default;
  VoxelVolume(Dims dims, Spacing spacing, std::vector<double> intensities);

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  const std::vector<double>& intensities() const { return hu_; }
  double at(int x, int y, int z) const { return hu_[dims_.index(x, y, z)]; }
  double operator[](std::size_t i) const { return hu_[i]; }

  friend bool operator==(const VoxelVolume&, const VoxelVolume&) = default;

 private:
  Dims dims_;
  Spacing spacing_;
  std::vector<double> hu_;
};

/// Binary region aligned with a VoxelVolume.
class RoiMask {
 public:
  RoiMask() = default;
  RoiMask(Dims dims, std::vector<std::uint8_t> voxels);

  const Dims& dims() const { return dims_; }
  const std::vector<std::uint8_t>& voxels() const { return voxels_; }
  bool at(int x, int y, int z) const { return voxels_[dims_.index(x, y, z)] != 0; }
  bool operator[](std::size_t i) const { return voxels_[i] != 0; }
  std::size_t count() const;

  friend bool operator==(const RoiMask&, const RoiMask&) = default;

 private:
  Dims dims_;
  std::vector<std::uint8_t> voxels_;
};

/// Gray levels of an ROI. Voxels outside the mask hold level 0.
struct DiscretizedRoi {
  Dims dims;
  std::vector<int> levels;
  int num_levels = 0;
  double bin_width = 0.0;

  int at(int x, int y, int z) const { return levels[dims.index(x, y, z)]; }
  bool inside(int x, int y, int z) const {
    return dims.contains(x, y, z) && levels[dims.index(x, y, z)] > 0;
  }
  std::size_t voxel_count() const;
};

struct PreprocessConfig {
  bool gas_exclusion_enabled = true;
  double hu_cutoff = -150.0;
  double bin_width = 25.0;
};

enum class DType { Int16, Float32, UInt8 };

std::string to_string(DType dtype);
DType dtype_from_string(const std::string& name);

/// Reads a sidecar (JSON: dims, spacing_mm, dtype, byte_order, data_file)
/// and its little-endian raw payload. data_file is resolved relative to the
/// sidecar's directory.
VoxelVolume load_volume(const std::filesystem::path& sidecar_path);
RoiMask load_mask(const std::filesystem::path& sidecar_path);

/// Int16 requires integral intensities in range; Float32 stores the
/// intensities rounded to float.
void write_volume(const std::filesystem::path& sidecar_path, const VoxelVolume& volume,
                  DType dtype = DType::Int16);
void write_mask(const std::filesystem::path& sidecar_path, const RoiMask& mask,
                const Spacing& spacing = {});

/// Removes in-mask voxels with intensity below the HU cutoff. Throws
/// DataError("ROI vanished after gas exclusion") when nothing remains.
RoiMask exclude_gas(const VoxelVolume& volume, const RoiMask& mask,
                    const PreprocessConfig& cfg);

/// Fixed-width binning anchored at the ROI minimum:
/// level = floor((I - min) / bin_width) + 1.
DiscretizedRoi discretize(const VoxelVolume& volume, const RoiMask& mask,
                          const PreprocessConfig& cfg);

}  // namespace rfs::imgvol
