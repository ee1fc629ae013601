// Statistics over a normalized texture matrix p(i, j), i = gray level (1-based row),
// j = co-occurring level (GLCM) or run length / zone size (GLRLM, GLSZM, MGLSZM).
//
// GLCM
//   energy       sum p^2
//   entropy      -sum p log2 p              (0 log 0 = 0)
//   contrast     sum (i - j)^2 p
//   correlation  sum (i - mx)(j - my) p / (sx sy)   (1 when sx sy = 0)
//   variance     sx^2 = sum (i - mx)^2 p
//   mean         mx = sum i p
//   skewness     sum (i - mx)^3 p / sx^3    (0 when sx = 0)
//   kurtosis     sum (i - mx)^4 p / sx^4 - 3 (0 when sx = 0)
//   homogeneity  sum p / (1 + |i - j|)
// GLRLM
//   short_run_emphasis  sum p / j^2        long_run_emphasis  sum p j^2
//   gray_level_nonuniformity  sum_i (sum_j p)^2
//   run_length_nonuniformity  sum_j (sum_i p)^2
//   run_percentage  runs / voxels
// GLSZM, MGLSZM: same shapes with zones in place of runs.

#include <algorithm>
#include <cmath>

#include "chestprog/texture.hpp"

namespace chestprog::texture {
namespace {

constexpr std::array<std::string_view, 9> kGlcmNames = {
    "energy", "entropy", "contrast", "correlation", "variance", "mean", "skewness", "kurtosis",
    "homogeneity"};
constexpr std::array<std::string_view, 5> kGlrlmNames = {
    "short_run_emphasis", "long_run_emphasis", "gray_level_nonuniformity", "run_length_nonuniformity",
    "run_percentage"};
constexpr std::array<std::string_view, 5> kGlszmNames = {
    "small_zone_emphasis", "large_zone_emphasis", "zone_size_nonuniformity", "gray_level_nonuniformity",
    "zone_percentage"};

FeatureVector sentinels(MatrixKind kind) {
  FeatureVector out;
  for (auto n : statistic_names(kind)) out.push_back({std::string(n), std::nullopt});
  return out;
}

FeatureVector glcm_stats(const TextureMatrix& m, double total) {
  double energy = 0, entropy = 0, contrast = 0, homogeneity = 0, mx = 0, my = 0;
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      const double p = m(r, c) / total;
      if (p <= 0.0) continue;
      const double i = r + 1.0, j = c + 1.0;
      energy += p * p;
      entropy -= p * std::log2(p);
      contrast += (i - j) * (i - j) * p;
      homogeneity += p / (1.0 + std::abs(i - j));
      mx += i * p;
      my += j * p;
    }
  }
  double vx = 0, vy = 0, cov = 0, m3 = 0, m4 = 0;
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      const double p = m(r, c) / total;
      if (p <= 0.0) continue;
      const double di = r + 1.0 - mx, dj = c + 1.0 - my;
      vx += di * di * p;
      vy += dj * dj * p;
      cov += di * dj * p;
      m3 += di * di * di * p;
      m4 += di * di * di * di * p;
    }
  }
  const double sx = std::sqrt(vx), sy = std::sqrt(vy);
  const double correlation = sx * sy > 0.0 ? cov / (sx * sy) : 1.0;
  const double skew = vx > 0.0 ? m3 / (vx * sx) : 0.0;
  const double kurt = vx > 0.0 ? m4 / (vx * vx) - 3.0 : 0.0;
  const double values[] = {energy, entropy, contrast, correlation, vx, mx, skew, kurt, homogeneity};
  FeatureVector out;
  for (std::size_t s = 0; s < kGlcmNames.size(); ++s) out.push_back({std::string(kGlcmNames[s]), values[s]});
  return out;
}

FeatureVector run_zone_stats(const TextureMatrix& m, double total, std::span<const std::string_view> names) {
  double small = 0, large = 0;
  std::vector<double> by_level(static_cast<std::size_t>(m.rows), 0.0);
  std::vector<double> by_size(static_cast<std::size_t>(m.cols), 0.0);
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      const double p = m(r, c) / total;
      if (p == 0.0) continue;
      const double j = c + 1.0;
      small += p / (j * j);
      large += p * j * j;
      by_level[r] += p;
      by_size[c] += p;
    }
  }
  double gln = 0, sn = 0;
  for (double v : by_level) gln += v * v;
  for (double v : by_size) sn += v * v;
  const double pct = m.voxels > 0.0 ? m.units / m.voxels : 0.0;
  // GLRLM order: SRE, LRE, GLN, RLN, RP.  GLSZM order: SZE, LZE, ZSN, GLN, ZP.
  const bool is_run = m.kind == MatrixKind::kGlrlm;
  const double values[] = {small, large, is_run ? gln : sn, is_run ? sn : gln, pct};
  FeatureVector out;
  for (std::size_t s = 0; s < names.size(); ++s) out.push_back({std::string(names[s]), values[s]});
  return out;
}

template <typename Builder>
FeatureVector direction_average(MatrixKind kind, std::span<const Direction> directions, Builder&& build) {
  std::vector<Direction> ordered(directions.begin(), directions.end());
  std::sort(ordered.begin(), ordered.end());
  const auto names = statistic_names(kind);
  std::vector<double> sum(names.size(), 0.0);
  int used = 0;
  for (const auto& a : ordered) {
    const auto stats = texture_statistics(build(a));
    if (!stats.front().value) continue;
    for (std::size_t s = 0; s < names.size(); ++s) sum[s] += *stats[s].value;
    ++used;
  }
  if (used == 0) return sentinels(kind);
  FeatureVector out;
  for (std::size_t s = 0; s < names.size(); ++s) out.push_back({std::string(names[s]), sum[s] / used});
  return out;
}

}  // namespace

std::span<const std::string_view> statistic_names(MatrixKind kind) {
  switch (kind) {
    case MatrixKind::kGlcm: return kGlcmNames;
    case MatrixKind::kGlrlm: return kGlrlmNames;
    case MatrixKind::kGlszm:
    case MatrixKind::kMglszm: return kGlszmNames;
  }
  return {};
}

FeatureVector texture_statistics(const TextureMatrix& matrix) {
  const double total = matrix.total();
  if (!(total > 0.0)) return sentinels(matrix.kind);
  switch (matrix.kind) {
    case MatrixKind::kGlcm: return glcm_stats(matrix, total);
    case MatrixKind::kGlrlm: return run_zone_stats(matrix, total, kGlrlmNames);
    case MatrixKind::kGlszm:
    case MatrixKind::kMglszm: return run_zone_stats(matrix, total, kGlszmNames);
  }
  return {};
}

FeatureVector glcm_features(const QuantizedRegion& region, std::span<const Direction> directions,
                            int distance) {
  return direction_average(MatrixKind::kGlcm, directions,
                           [&](Direction a) { return glcm(region, distance, a); });
}

FeatureVector glrlm_features(const QuantizedRegion& region, std::span<const Direction> directions) {
  return direction_average(MatrixKind::kGlrlm, directions, [&](Direction a) { return glrlm(region, a); });
}

}  // namespace chestprog::texture
