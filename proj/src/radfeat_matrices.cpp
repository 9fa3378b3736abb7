#include "rfs/radfeat.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <vector>

namespace rfs::radfeat {

using imgvol::DiscretizedRoi;

namespace {

constexpr std::array<Offset, 13> kDirections = {{
    {1, 0, 0}, {0, 1, 0}, {0, 0, 1},
    {1, 1, 0}, {1, -1, 0}, {1, 0, 1}, {1, 0, -1}, {0, 1, 1}, {0, 1, -1},
    {1, 1, 1}, {1, 1, -1}, {1, -1, 1}, {1, -1, -1},
}};

template <typename Fn>
void for_each_inside(const DiscretizedRoi& roi, Fn&& fn) {
  const auto& d = roi.dims;
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        int level = roi.at(x, y, z);
        if (level > 0) fn(x, y, z, level);
      }
}

}  // namespace

std::span<const Offset> directions() { return kDirections; }

std::int64_t TextureMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

std::vector<TextureMatrix> build_glcm(const DiscretizedRoi& roi) {
  const int ng = roi.num_levels;
  std::vector<TextureMatrix> out;
  out.reserve(kDirections.size());
  for (const auto& off : kDirections) {
    TextureMatrix m(MatrixKind::Glcm, ng, ng, off);
    for_each_inside(roi, [&](int x, int y, int z, int level) {
      int nx = x + off[0], ny = y + off[1], nz = z + off[2];
      if (!roi.inside(nx, ny, nz)) return;
      int other = roi.at(nx, ny, nz);
      ++m.at(level, other);
      ++m.at(other, level);
    });
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<TextureMatrix> build_glrlm(const DiscretizedRoi& roi) {
  const int ng = roi.num_levels;
  std::vector<TextureMatrix> out;
  out.reserve(kDirections.size());
  for (const auto& off : kDirections) {
    // (level, length) -> count; the run-length axis is sized afterwards.
    std::map<std::pair<int, int>, std::int64_t> runs;
    int longest = 1;
    for_each_inside(roi, [&](int x, int y, int z, int level) {
      int px = x - off[0], py = y - off[1], pz = z - off[2];
      if (roi.inside(px, py, pz) && roi.at(px, py, pz) == level) return;  // not a run start
      int len = 1;
      int cx = x + off[0], cy = y + off[1], cz = z + off[2];
      while (roi.inside(cx, cy, cz) && roi.at(cx, cy, cz) == level) {
        ++len;
        cx += off[0];
        cy += off[1];
        cz += off[2];
      }
      ++runs[{level, len}];
      longest = std::max(longest, len);
    });
    TextureMatrix m(MatrixKind::Glrlm, ng, longest, off);
    for (const auto& [key, n] : runs) m.at(key.first, key.second) = n;
    out.push_back(std::move(m));
  }
  return out;
}

TextureMatrix build_glszm(const DiscretizedRoi& roi) {
  const auto& d = roi.dims;
  std::vector<char> visited(roi.levels.size(), 0);
  std::map<std::pair<int, int>, std::int64_t> zones;
  int largest = 1;
  std::vector<std::array<int, 3>> stack;
  for_each_inside(roi, [&](int x, int y, int z, int level) {
    if (visited[d.index(x, y, z)]) return;
    visited[d.index(x, y, z)] = 1;
    stack.assign(1, {x, y, z});
    int size = 0;
    while (!stack.empty()) {
      auto [cx, cy, cz] = stack.back();
      stack.pop_back();
      ++size;
      for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            int nx = cx + dx, ny = cy + dy, nz = cz + dz;
            if (!roi.inside(nx, ny, nz)) continue;
            auto idx = d.index(nx, ny, nz);
            if (visited[idx] || roi.levels[idx] != level) continue;
            visited[idx] = 1;
            stack.push_back({nx, ny, nz});
          }
    }
    ++zones[{level, size}];
    largest = std::max(largest, size);
  });
  TextureMatrix m(MatrixKind::Glszm, roi.num_levels, largest);
  for (const auto& [key, n] : zones) m.at(key.first, key.second) = n;
  return m;
}

TextureMatrix build_gldm(const DiscretizedRoi& roi) {
  // alpha = 0: a neighbor is dependent only when its level is identical.
  std::vector<std::pair<int, int>> per_voxel;
  int max_dep = 0;
  for_each_inside(roi, [&](int x, int y, int z, int level) {
    int k = 0;
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0 && dz == 0) continue;
          if (roi.inside(x + dx, y + dy, z + dz) && roi.at(x + dx, y + dy, z + dz) == level) ++k;
        }
    per_voxel.emplace_back(level, k);
    max_dep = std::max(max_dep, k);
  });
  TextureMatrix m(MatrixKind::Gldm, roi.num_levels, max_dep + 1);
  for (const auto& [level, k] : per_voxel) ++m.at(level, k + 1);
  return m;
}

TextureMatrices build_texture_matrices(const DiscretizedRoi& roi) {
  TextureMatrices t;
  t.glcm = build_glcm(roi);
  t.glrlm = build_glrlm(roi);
  t.glszm = build_glszm(roi);
  t.gldm = build_gldm(roi);
  t.num_levels = roi.num_levels;
  t.voxel_count = static_cast<std::int64_t>(roi.voxel_count());
  return t;
}

}  // namespace rfs::radfeat
