#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rfs/imgvol.hpp"

namespace rfs::radfeat {

using Offset = std::array<int, 3>;

/// The 13 unique distance-1 offsets of a 26-neighborhood (one of each
/// +d / -d pair).
std::span<const Offset> directions();

enum class MatrixKind { Glcm, Glrlm, Glszm, Gldm };

/// Dense count table. Rows are gray levels 1..rows, columns are 1-based:
/// co-occurring level (GLCM), run length (GLRLM), zone size (GLSZM) or
/// dependence count + 1 (GLDM).
struct TextureMatrix {
  MatrixKind kind = MatrixKind::Glcm;
  int rows = 0;
  int cols = 0;
  std::vector<std::int64_t> counts;
  std::optional<Offset> direction;

  TextureMatrix() = default;
  TextureMatrix(MatrixKind k, int r, int c, std::optional<Offset> dir = std::nullopt)
      : kind(k), rows(r), cols(c), counts(static_cast<std::size_t>(r) * c, 0), direction(dir) {}

  std::int64_t at(int i, int j) const { return counts[static_cast<std::size_t>(i - 1) * cols + (j - 1)]; }
  std::int64_t& at(int i, int j) { return counts[static_cast<std::size_t>(i - 1) * cols + (j - 1)]; }
  std::int64_t total() const;
};

/// Ordered (name, value) list. Order follows the registry.
class FeatureVector {
 public:
  void add(std::string name, double value) { entries_.emplace_back(std::move(name), value); }
  void append(const FeatureVector& other);

  const std::vector<std::pair<std::string, double>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  /// Throws std::out_of_range for unknown names.
  double at(const std::string& name) const;
  bool contains(const std::string& name) const;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

 private:
  std::vector<std::pair<std::string, double>> entries_;
};

/// The fixed, ordered list of the 100 radiomics feature names:
/// 14 shape, 18 first-order, 22 GLCM, 16 GLRLM, 16 GLSZM, 14 GLDM.
const std::vector<std::string>& feature_registry();

std::vector<TextureMatrix> build_glcm(const imgvol::DiscretizedRoi& roi);
std::vector<TextureMatrix> build_glrlm(const imgvol::DiscretizedRoi& roi);
TextureMatrix build_glszm(const imgvol::DiscretizedRoi& roi);
TextureMatrix build_gldm(const imgvol::DiscretizedRoi& roi);

struct TextureMatrices {
  std::vector<TextureMatrix> glcm;
  std::vector<TextureMatrix> glrlm;
  TextureMatrix glszm;
  TextureMatrix gldm;
  int num_levels = 0;
  std::int64_t voxel_count = 0;
};

TextureMatrices build_texture_matrices(const imgvol::DiscretizedRoi& roi);

FeatureVector glcm_features(std::span<const TextureMatrix> glcm, int num_levels);
FeatureVector glrlm_features(std::span<const TextureMatrix> glrlm, std::int64_t voxel_count);
FeatureVector glszm_features(const TextureMatrix& glszm, std::int64_t voxel_count);
FeatureVector gldm_features(const TextureMatrix& gldm);

/// All 68 texture features, per-direction kinds averaged over non-empty
/// directions.
FeatureVector texture_features(const TextureMatrices& matrices);

/// 18 first-order statistics on raw in-mask HU; entropy and uniformity use
/// the discretized levels of the same ROI.
FeatureVector first_order_features(const imgvol::VoxelVolume& volume, const imgvol::RoiMask& mask,
                                   const imgvol::DiscretizedRoi& roi);

/// Percentile with linear interpolation between closest ranks;
/// `sorted` must be ascending and non-empty, q in [0, 1].
double percentile(std::span<const double> sorted, double q);

/// 14 shape features from voxel-center geometry and exposed-face surface.
FeatureVector shape_features(const imgvol::RoiMask& mask, const imgvol::Spacing& spacing);

/// Gas exclusion, discretization, then every extractor. Exactly 100 finite
/// values in registry order.
FeatureVector extract_all(const imgvol::VoxelVolume& volume, const imgvol::RoiMask& mask,
                          const imgvol::PreprocessConfig& cfg);

}  // namespace rfs::radfeat
