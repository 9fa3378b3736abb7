#include "rfs/radfeat.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "rfs/error.hpp"

namespace rfs::radfeat {

using imgvol::DiscretizedRoi;
using imgvol::RoiMask;
using imgvol::Spacing;
using imgvol::VoxelVolume;

namespace {

const std::vector<std::string> kShapeNames = {
    "Elongation",          "Flatness",   "LeastAxisLength",  "MajorAxisLength",
    "Maximum2DDiameterColumn", "Maximum2DDiameterRow", "Maximum2DDiameterSlice",
    "Maximum3DDiameter",   "MeshVolume", "MinorAxisLength",  "Sphericity",
    "SurfaceArea",         "SurfaceVolumeRatio", "VoxelVolume"};

const std::vector<std::string> kFirstOrderNames = {
    "10Percentile", "90Percentile", "Energy",  "Entropy", "InterquartileRange",
    "Kurtosis",     "Maximum",      "MeanAbsoluteDeviation", "Mean", "Median",
    "Minimum",      "Range",        "RobustMeanAbsoluteDeviation", "RootMeanSquared",
    "Skewness",     "TotalEnergy",  "Uniformity", "Variance"};

const std::vector<std::string> kGlcmNames = {
    "Autocorrelation",   "JointAverage",   "ClusterProminence", "ClusterShade",
    "ClusterTendency",   "Contrast",       "Correlation",       "DifferenceAverage",
    "DifferenceEntropy", "DifferenceVariance", "JointEnergy",   "JointEntropy",
    "Imc1",              "Imc2",           "Idm",               "Idmn",
    "Id",                "Idn",            "InverseVariance",   "MaximumProbability",
    "SumEntropy",        "SumSquares"};

const std::vector<std::string> kGlrlmNames = {
    "ShortRunEmphasis", "LongRunEmphasis", "GrayLevelNonUniformity",
    "GrayLevelNonUniformityNormalized", "RunLengthNonUniformity",
    "RunLengthNonUniformityNormalized", "RunPercentage", "GrayLevelVariance", "RunVariance",
    "RunEntropy", "LowGrayLevelRunEmphasis", "HighGrayLevelRunEmphasis",
    "ShortRunLowGrayLevelEmphasis", "ShortRunHighGrayLevelEmphasis",
    "LongRunLowGrayLevelEmphasis", "LongRunHighGrayLevelEmphasis"};

const std::vector<std::string> kGlszmNames = {
    "SmallAreaEmphasis", "LargeAreaEmphasis", "GrayLevelNonUniformity",
    "GrayLevelNonUniformityNormalized", "SizeZoneNonUniformity",
    "SizeZoneNonUniformityNormalized", "ZonePercentage", "GrayLevelVariance", "ZoneVariance",
    "ZoneEntropy", "LowGrayLevelZoneEmphasis", "HighGrayLevelZoneEmphasis",
    "SmallAreaLowGrayLevelEmphasis", "SmallAreaHighGrayLevelEmphasis",
    "LargeAreaLowGrayLevelEmphasis", "LargeAreaHighGrayLevelEmphasis"};

const std::vector<std::string> kGldmNames = {
    "SmallDependenceEmphasis", "LargeDependenceEmphasis", "GrayLevelNonUniformity",
    "DependenceNonUniformity", "DependenceNonUniformityNormalized", "GrayLevelVariance",
    "DependenceVariance", "DependenceEntropy", "LowGrayLevelEmphasis", "HighGrayLevelEmphasis",
    "SmallDependenceLowGrayLevelEmphasis", "SmallDependenceHighGrayLevelEmphasis",
    "LargeDependenceLowGrayLevelEmphasis", "LargeDependenceHighGrayLevelEmphasis"};

FeatureVector make_vector(const std::string& prefix, const std::vector<std::string>& names,
                          const std::vector<double>& values) {
  FeatureVector fv;
  for (std::size_t i = 0; i < names.size(); ++i) fv.add(prefix + names[i], values[i]);
  return fv;
}

double plogp(double p) { return p > 0 ? p * std::log2(p) : 0.0; }

// One GLCM, already normalized to sum 1, as an Ng x Ng row-major table.
std::vector<double> glcm_single(const std::vector<double>& p, int ng) {
  std::vector<double> px(ng, 0.0), py(ng, 0.0), pxy_sum(2 * ng + 1, 0.0), pxy_diff(ng, 0.0);
  for (int i = 1; i <= ng; ++i)
    for (int j = 1; j <= ng; ++j) {
      double v = p[(i - 1) * ng + (j - 1)];
      px[i - 1] += v;
      py[j - 1] += v;
      pxy_sum[i + j] += v;
      pxy_diff[std::abs(i - j)] += v;
    }
  double ux = 0, uy = 0;
  for (int i = 1; i <= ng; ++i) {
    ux += i * px[i - 1];
    uy += i * py[i - 1];
  }
  double vx = 0, vy = 0;
  for (int i = 1; i <= ng; ++i) {
    vx += (i - ux) * (i - ux) * px[i - 1];
    vy += (i - uy) * (i - uy) * py[i - 1];
  }
  double sx = std::sqrt(vx), sy = std::sqrt(vy);

  double autocorr = 0, prom = 0, shade = 0, tend = 0, contrast = 0, energy = 0, hxy = 0,
         hxy1 = 0, idm = 0, idmn = 0, id = 0, idn = 0, maxp = 0, sumsq = 0;
  const double ng2 = static_cast<double>(ng) * ng;
  for (int i = 1; i <= ng; ++i)
    for (int j = 1; j <= ng; ++j) {
      double v = p[(i - 1) * ng + (j - 1)];
      if (v <= 0) continue;
      double c = i + j - ux - uy;
      double d = i - j;
      autocorr += v * i * j;
      prom += std::pow(c, 4) * v;
      shade += std::pow(c, 3) * v;
      tend += c * c * v;
      contrast += d * d * v;
      energy += v * v;
      hxy -= plogp(v);
      hxy1 -= v * std::log2(px[i - 1] * py[j - 1]);
      idm += v / (1.0 + d * d);
      idmn += v / (1.0 + d * d / ng2);
      id += v / (1.0 + std::abs(d));
      idn += v / (1.0 + std::abs(d) / ng);
      maxp = std::max(maxp, v);
      sumsq += (i - ux) * (i - ux) * v;
    }
  double hx = 0, hy = 0, hxy2 = 0;
  for (int i = 0; i < ng; ++i) {
    hx -= plogp(px[i]);
    hy -= plogp(py[i]);
    for (int j = 0; j < ng; ++j) hxy2 -= plogp(px[i] * py[j]);
  }
  // Flat region: correlation reported as 1.
  double corr = (sx * sy > 1e-12) ? (autocorr - ux * uy) / (sx * sy) : 1.0;
  double diff_avg = 0, diff_ent = 0, inv_var = 0;
  for (int k = 0; k < ng; ++k) {
    diff_avg += k * pxy_diff[k];
    diff_ent -= plogp(pxy_diff[k]);
    if (k > 0) inv_var += pxy_diff[k] / (static_cast<double>(k) * k);
  }
  double diff_var = 0;
  for (int k = 0; k < ng; ++k) diff_var += (k - diff_avg) * (k - diff_avg) * pxy_diff[k];
  double sum_ent = 0;
  for (double v : pxy_sum) sum_ent -= plogp(v);
  double hmax = std::max(hx, hy);
  double imc1 = hmax > 0 ? (hxy - hxy1) / hmax : 0.0;
  double imc2 = std::sqrt(std::max(0.0, 1.0 - std::exp(-2.0 * std::max(0.0, hxy2 - hxy))));

  return {autocorr, ux,      prom,     shade,   tend, contrast, corr, diff_avg,
          diff_ent, diff_var, energy,  hxy,     imc1, imc2,     idm,  idmn,
          id,       idn,      inv_var, maxp,    sum_ent, sumsq};
}

// Statistics shared by GLRLM, GLSZM and GLDM. j is the 1-based second index.
struct ZoneStats {
  double small_emph, large_emph, gln, glnn, jn, jnn, percentage, glv, jv, entropy, lgle, hgle,
      s_lgle, s_hgle, l_lgle, l_hgle;
};

ZoneStats zone_stats(const TextureMatrix& m, std::int64_t voxel_count) {
  ZoneStats s{};
  const double n = static_cast<double>(m.total());
  std::vector<double> pg(m.rows, 0.0), pj(m.cols, 0.0);
  double mu_i = 0, mu_j = 0;
  for (int i = 1; i <= m.rows; ++i)
    for (int j = 1; j <= m.cols; ++j) {
      double c = static_cast<double>(m.at(i, j));
      if (c == 0) continue;
      double ii = static_cast<double>(i) * i, jj = static_cast<double>(j) * j;
      pg[i - 1] += c;
      pj[j - 1] += c;
      s.small_emph += c / jj;
      s.large_emph += c * jj;
      s.lgle += c / ii;
      s.hgle += c * ii;
      s.s_lgle += c / (ii * jj);
      s.s_hgle += c * ii / jj;
      s.l_lgle += c * jj / ii;
      s.l_hgle += c * ii * jj;
      double p = c / n;
      mu_i += p * i;
      mu_j += p * j;
      s.entropy -= plogp(p);
    }
  for (int i = 1; i <= m.rows; ++i)
    for (int j = 1; j <= m.cols; ++j) {
      double c = static_cast<double>(m.at(i, j));
      if (c == 0) continue;
      double p = c / n;
      s.glv += p * (i - mu_i) * (i - mu_i);
      s.jv += p * (j - mu_j) * (j - mu_j);
    }
  for (double v : pg) s.gln += v * v;
  for (double v : pj) s.jn += v * v;
  s.glnn = s.gln / (n * n);
  s.jnn = s.jn / (n * n);
  s.gln /= n;
  s.jn /= n;
  for (double* v : {&s.small_emph, &s.large_emph, &s.lgle, &s.hgle, &s.s_lgle, &s.s_hgle,
                    &s.l_lgle, &s.l_hgle})
    *v /= n;
  s.percentage = n / static_cast<double>(voxel_count);
  return s;
}

std::vector<double> run_like_values(const ZoneStats& s) {
  return {s.small_emph, s.large_emph, s.gln,  s.glnn, s.jn,   s.jnn,    s.percentage, s.glv,
          s.jv,         s.entropy,    s.lgle, s.hgle, s.s_lgle, s.s_hgle, s.l_lgle,   s.l_hgle};
}

}  // namespace

void FeatureVector::append(const FeatureVector& other) {
  entries_.insert(entries_.end(), other.entries_.begin(), other.entries_.end());
}

double FeatureVector::at(const std::string& name) const {
  for (const auto& [n, v] : entries_) {
    if (n == name) return v;
  }
  throw std::out_of_range("no feature '" + name + "'");
}

bool FeatureVector::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == name; });
}

const std::vector<std::string>& feature_registry() {
  static const std::vector<std::string> registry = [] {
    std::vector<std::string> r;
    auto add = [&](const std::string& prefix, const std::vector<std::string>& names) {
      for (const auto& n : names) r.push_back(prefix + n);
    };
    add("shape_", kShapeNames);
    add("firstorder_", kFirstOrderNames);
    add("glcm_", kGlcmNames);
    add("glrlm_", kGlrlmNames);
    add("glszm_", kGlszmNames);
    add("gldm_", kGldmNames);
    return r;
  }();
  return registry;
}

FeatureVector glcm_features(std::span<const TextureMatrix> glcm, int num_levels) {
  const int ng = num_levels;
  std::vector<double> acc(kGlcmNames.size(), 0.0);
  int used = 0;
  for (const auto& m : glcm) {
    double total = static_cast<double>(m.total());
    if (total <= 0) continue;
    std::vector<double> p(m.counts.size());
    for (std::size_t k = 0; k < p.size(); ++k) p[k] = static_cast<double>(m.counts[k]) / total;
    auto v = glcm_single(p, ng);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += v[k];
    ++used;
  }
  if (used == 0) {
    // No neighboring pairs at all: report homogeneous-region values.
    std::vector<double> p(static_cast<std::size_t>(ng) * ng, 0.0);
    p[0] = 1.0;
    acc = glcm_single(p, ng);
    used = 1;
  }
  for (auto& v : acc) v /= used;
  return make_vector("glcm_", kGlcmNames, acc);
}

FeatureVector glrlm_features(std::span<const TextureMatrix> glrlm, std::int64_t voxel_count) {
  std::vector<double> acc(kGlrlmNames.size(), 0.0);
  int used = 0;
  for (const auto& m : glrlm) {
    if (m.total() <= 0) continue;
    auto v = run_like_values(zone_stats(m, voxel_count));
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += v[k];
    ++used;
  }
  if (used == 0) throw DataError("GLRLM is empty");
  for (auto& v : acc) v /= used;
  return make_vector("glrlm_", kGlrlmNames, acc);
}

FeatureVector glszm_features(const TextureMatrix& glszm, std::int64_t voxel_count) {
  if (glszm.total() <= 0) throw DataError("GLSZM is empty");
  return make_vector("glszm_", kGlszmNames, run_like_values(zone_stats(glszm, voxel_count)));
}

FeatureVector gldm_features(const TextureMatrix& gldm) {
  if (gldm.total() <= 0) throw DataError("GLDM is empty");
  auto s = zone_stats(gldm, gldm.total());
  return make_vector("gldm_", kGldmNames,
                     {s.small_emph, s.large_emph, s.gln, s.jn, s.jnn, s.glv, s.jv, s.entropy,
                      s.lgle, s.hgle, s.s_lgle, s.s_hgle, s.l_lgle, s.l_hgle});
}

FeatureVector texture_features(const TextureMatrices& t) {
  FeatureVector fv = glcm_features(t.glcm, t.num_levels);
  fv.append(glrlm_features(t.glrlm, t.voxel_count));
  fv.append(glszm_features(t.glszm, t.voxel_count));
  fv.append(gldm_features(t.gldm));
  return fv;
}

double percentile(std::span<const double> sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

FeatureVector first_order_features(const VoxelVolume& volume, const RoiMask& mask,
                                   const DiscretizedRoi& roi) {
  std::vector<double> x;
  for (std::size_t i = 0; i < mask.voxels().size(); ++i) {
    if (mask[i]) x.push_back(volume[i]);
  }
  if (x.empty()) throw DataError("empty ROI");
  const double n = static_cast<double>(x.size());
  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());

  double sum = 0, sumsq = 0;
  for (double v : x) {
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / n;
  double m2 = 0, m3 = 0, m4 = 0, mad = 0;
  for (double v : x) {
    double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
    mad += std::abs(d);
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  mad /= n;
  const bool flat = m2 <= 0.0;
  const double skew = flat ? 0.0 : m3 / std::pow(m2, 1.5);
  const double kurt = flat ? 0.0 : m4 / (m2 * m2);

  const double p10 = percentile(sorted, 0.10);
  const double p90 = percentile(sorted, 0.90);
  const double p25 = percentile(sorted, 0.25);
  const double p75 = percentile(sorted, 0.75);
  const double median = percentile(sorted, 0.5);

  double rsum = 0;
  std::size_t rn = 0;
  for (double v : x) {
    if (v >= p10 && v <= p90) {
      rsum += v;
      ++rn;
    }
  }
  const double rmean = rsum / static_cast<double>(rn);
  double rmad = 0;
  for (double v : x) {
    if (v >= p10 && v <= p90) rmad += std::abs(v - rmean);
  }
  rmad /= static_cast<double>(rn);

  std::vector<double> hist(static_cast<std::size_t>(roi.num_levels) + 1, 0.0);
  std::size_t counted = 0;
  for (std::size_t i = 0; i < roi.levels.size(); ++i) {
    if (roi.levels[i] > 0 && mask[i]) {
      hist[roi.levels[i]] += 1.0;
      ++counted;
    }
  }
  double entropy = 0, uniformity = 0;
  for (double h : hist) {
    double p = h / static_cast<double>(counted);
    entropy -= plogp(p);
    uniformity += p * p;
  }
  const auto& s = volume.spacing();
  const double voxel_volume = s.x * s.y * s.z;

  return make_vector("firstorder_", kFirstOrderNames,
                     {p10, p90, sumsq, entropy, p75 - p25, kurt, sorted.back(), mad, mean, median,
                      sorted.front(), sorted.back() - sorted.front(), rmad, std::sqrt(sumsq / n),
                      skew, sumsq * voxel_volume, uniformity, m2});
}

FeatureVector shape_features(const RoiMask& mask, const Spacing& spacing) {
  const auto& d = mask.dims();
  std::vector<Eigen::Vector3d> pts;
  std::vector<std::array<int, 3>> surface;
  double area = 0;
  auto outside = [&](int x, int y, int z) { return !d.contains(x, y, z) || !mask.at(x, y, z); };
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        if (!mask.at(x, y, z)) continue;
        pts.emplace_back(x * spacing.x, y * spacing.y, z * spacing.z);
        int faces_x = outside(x - 1, y, z) + outside(x + 1, y, z);
        int faces_y = outside(x, y - 1, z) + outside(x, y + 1, z);
        int faces_z = outside(x, y, z - 1) + outside(x, y, z + 1);
        area += faces_x * spacing.y * spacing.z + faces_y * spacing.x * spacing.z +
                faces_z * spacing.x * spacing.y;
        if (faces_x + faces_y + faces_z > 0) surface.push_back({x, y, z});
      }
  if (pts.empty()) throw DataError("empty ROI");
  const double n = static_cast<double>(pts.size());
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= n;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  cov /= n;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov, Eigen::EigenvaluesOnly);
  // Ascending order; clamp tiny negative round-off.
  const double l3 = std::max(0.0, es.eigenvalues()[0]);
  const double l2 = std::max(0.0, es.eigenvalues()[1]);
  const double l1 = std::max(0.0, es.eigenvalues()[2]);
  const double elongation = l1 > 0 ? std::sqrt(l2 / l1) : 1.0;
  const double flatness = l1 > 0 ? std::sqrt(l3 / l1) : 1.0;

  double d3 = 0, d_slice = 0, d_col = 0, d_row = 0;
  for (std::size_t a = 0; a < surface.size(); ++a) {
    for (std::size_t b = a + 1; b < surface.size(); ++b) {
      const auto& u = surface[a];
      const auto& v = surface[b];
      double dx = (u[0] - v[0]) * spacing.x, dy = (u[1] - v[1]) * spacing.y,
             dz = (u[2] - v[2]) * spacing.z;
      double dist2 = dx * dx + dy * dy + dz * dz;
      d3 = std::max(d3, dist2);
      if (u[2] == v[2]) d_slice = std::max(d_slice, dist2);
      if (u[1] == v[1]) d_col = std::max(d_col, dist2);
      if (u[0] == v[0]) d_row = std::max(d_row, dist2);
    }
  }
  const double volume = n * spacing.x * spacing.y * spacing.z;
  // The exposed-face surface encloses exactly the voxel volume.
  const double mesh_volume = volume;
  const double sphericity = std::cbrt(36.0 * M_PI * volume * volume) / area;

  return make_vector("shape_", kShapeNames,
                     {elongation, flatness, 4.0 * std::sqrt(l3), 4.0 * std::sqrt(l1),
                      std::sqrt(d_col), std::sqrt(d_row), std::sqrt(d_slice), std::sqrt(d3),
                      mesh_volume, 4.0 * std::sqrt(l2), sphericity, area, area / volume, volume});
}

FeatureVector extract_all(const VoxelVolume& volume, const RoiMask& mask,
                          const imgvol::PreprocessConfig& cfg) {
  RoiMask roi_mask = imgvol::exclude_gas(volume, mask, cfg);
  if (roi_mask.count() == 0) throw DataError("empty ROI");
  DiscretizedRoi roi = imgvol::discretize(volume, roi_mask, cfg);
  FeatureVector fv = shape_features(roi_mask, volume.spacing());
  fv.append(first_order_features(volume, roi_mask, roi));
  fv.append(texture_features(build_texture_matrices(roi)));
  for (const auto& [name, v] : fv.entries()) {
    if (!std::isfinite(v)) throw DataError("non-finite feature " + name);
  }
  return fv;
}

}  // namespace rfs::radfeat
