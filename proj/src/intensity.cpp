#include "chestprog/intensity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace chestprog::intensity {
namespace {

constexpr std::array<std::string_view, 8> kIntensityNames = {
    "mean", "median", "range", "variance", "skewness", "kurtosis", "energy", "entropy"};

FeatureVector sentinel_vector(std::span<const std::string> names) {
  FeatureVector out;
  for (const auto& n : names) out.push_back({n, std::nullopt});
  return out;
}

std::vector<std::string> spatial_names() {
  std::vector<std::string> names = {"centroid_x", "centroid_y", "centroid_z"};
  for (char axis : {'x', 'y', 'z'}) {
    for (int q = 1; q <= 4; ++q) names.push_back(std::string(1, axis) + "_q" + std::to_string(q) + "_mean");
  }
  return names;
}

}  // namespace

FeatureVector intensity_statistics(const Volume& volume, const AnatomyMask& mask, int bins, HuRange range) {
  require_same_dims(volume, mask);
  if (bins < 1) throw Error(ErrorCode::kInvalidArgument, "histogram needs at least one bin");
  std::vector<double> v;
  v.reserve(mask.popcount());
  for (std::size_t idx = 0; idx < volume.data().size(); ++idx) {
    if (mask.test(idx)) v.push_back(volume[idx]);
  }
  if (v.empty()) {
    std::vector<std::string> names(kIntensityNames.begin(), kIntensityNames.end());
    return sentinel_vector(names);
  }
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double x : v) {
    const double d = x - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  const double skew = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  const double kurt = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;

  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t half = sorted.size() / 2;
  const double median =
      sorted.size() % 2 == 1 ? sorted[half] : 0.5 * (sorted[half - 1] + sorted[half]);
  const double range_v = sorted.back() - sorted.front();

  std::vector<double> hist(static_cast<std::size_t>(bins), 0.0);
  const double width = static_cast<double>(range.hi - range.lo + 1);
  for (double x : v) {
    const double c = std::clamp<double>(x, range.lo, range.hi);
    const auto b = std::min<long>(bins - 1, static_cast<long>(std::floor((c - range.lo) * bins / width)));
    hist[static_cast<std::size_t>(b)] += 1.0;
  }
  double energy = 0, entropy = 0;
  for (double h : hist) {
    if (h == 0.0) continue;
    const double p = h / n;
    energy += p * p;
    entropy -= p * std::log2(p);
  }
  const double values[] = {mean, median, range_v, m2, skew, kurt, energy, entropy};
  FeatureVector out;
  for (std::size_t s = 0; s < kIntensityNames.size(); ++s) {
    out.push_back({std::string(kIntensityNames[s]), values[s]});
  }
  return out;
}

FeatureVector spatial_context(const Volume& volume, const AnatomyMask& mask) {
  const auto names = spatial_names();
  const auto voxels = masked_voxels(volume, mask);
  if (voxels.empty()) return sentinel_vector(names);

  double min_hu = voxels.front().hu;
  for (const auto& vx : voxels) min_hu = std::min(min_hu, vx.hu);
  double wsum = 0.0;
  for (const auto& vx : voxels) wsum += vx.hu - min_hu;
  const bool uniform = !(wsum > 0.0);

  auto coord = [](const MaskedVoxel& vx, int axis) {
    return axis == 0 ? vx.coord.x : axis == 1 ? vx.coord.y : vx.coord.z;
  };

  std::vector<double> values;
  for (int axis = 0; axis < 3; ++axis) {
    int lo = coord(voxels.front(), axis), hi = lo;
    double acc = 0.0, wacc = 0.0;
    for (const auto& vx : voxels) {
      const int c = coord(vx, axis);
      lo = std::min(lo, c);
      hi = std::max(hi, c);
      const double w = uniform ? 1.0 : vx.hu - min_hu;
      acc += w * c;
      wacc += w;
    }
    values.push_back(hi > lo ? (acc / wacc - lo) / (hi - lo) : 0.5);
  }

  const std::size_t n = voxels.size();
  std::vector<std::size_t> order(n);
  for (int axis = 0; axis < 3; ++axis) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return coord(voxels[a], axis) < coord(voxels[b], axis);
    });
    for (std::size_t q = 0; q < 4; ++q) {
      const std::size_t begin = q * n / 4, end = (q + 1) * n / 4;
      if (begin == end) {
        values.push_back(voxels[order[std::min(begin, n - 1)]].hu);
        continue;
      }
      double s = 0.0;
      for (std::size_t r = begin; r < end; ++r) s += voxels[order[r]].hu;
      values.push_back(s / static_cast<double>(end - begin));
    }
  }
  FeatureVector out;
  for (std::size_t s = 0; s < names.size(); ++s) out.push_back({names[s], values[s]});
  return out;
}

double anatomy_volume(const AnatomyMask& mask, const Spacing& spacing) {
  return static_cast<double>(mask.popcount()) * spacing.voxel_volume_mm3() / 1000.0;
}

}  // namespace chestprog::intensity
