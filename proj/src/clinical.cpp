#include "chestprog/clinical.hpp"

#include <vector>

namespace chestprog::clinical {

void validate(const ClinicalScoreConfig& cfg) {
  const auto& b = cfg.calcium_weight_bands;
  if (!(cfg.emphysema_threshold < cfg.calcium_threshold && cfg.calcium_threshold < b[0] && b[0] < b[1] &&
        b[1] < b[2])) {
    throw Error(ErrorCode::kInvalidArgument, "clinical thresholds must be strictly ordered");
  }
  if (!(cfg.min_lesion_area_mm2 >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "min_lesion_area must be nonnegative");
  }
}

std::optional<double> bmd_score(const Volume& volume, const AnatomyMask& spinal_column) {
  require_same_dims(volume, spinal_column);
  if (spinal_column.empty()) return std::nullopt;
  double sum = 0.0;
  for (std::size_t idx = 0; idx < volume.data().size(); ++idx) {
    if (spinal_column.test(idx)) sum += volume[idx];
  }
  return sum / static_cast<double>(spinal_column.popcount());
}

std::optional<double> attenuation_fraction(const Volume& volume, const AnatomyMask& mask,
                                           double threshold, Side side) {
  require_same_dims(volume, mask);
  if (mask.empty()) return std::nullopt;
  std::size_t hits = 0;
  for (std::size_t idx = 0; idx < volume.data().size(); ++idx) {
    if (!mask.test(idx)) continue;
    const bool below = volume[idx] < threshold;
    hits += (side == Side::kBelow) == below;
  }
  return static_cast<double>(hits) / static_cast<double>(mask.popcount());
}

std::optional<double> emphysema_score(const Volume& volume, const AnatomyMask& lungs,
                                      const ClinicalScoreConfig& cfg) {
  return attenuation_fraction(volume, lungs, cfg.emphysema_threshold, Side::kBelow);
}

int agatston_weight(double peak_hu, const ClinicalScoreConfig& cfg) {
  const auto& b = cfg.calcium_weight_bands;
  if (peak_hu < b[0]) return 1;
  if (peak_hu < b[1]) return 2;
  if (peak_hu < b[2]) return 3;
  return 4;
}

std::optional<double> calcium_score(const Volume& volume, const AnatomyMask& mask,
                                    const ClinicalScoreConfig& cfg) {
  require_same_dims(volume, mask);
  validate(cfg);
  if (mask.empty()) return std::nullopt;
  const Dims& d = volume.dims();
  const double pixel_area = volume.spacing().x * volume.spacing().y;
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(d.x) * d.y);
  std::vector<std::pair<int, int>> stack;
  double score = 0.0;
  for (int k = 0; k < d.z; ++k) {
    std::fill(seen.begin(), seen.end(), 0);
    auto candidate = [&](int i, int j) {
      const auto idx = d.index(i, j, k);
      return mask.test(idx) && volume[idx] >= cfg.calcium_threshold;
    };
    for (int j = 0; j < d.y; ++j) {
      for (int i = 0; i < d.x; ++i) {
        if (seen[static_cast<std::size_t>(j) * d.x + i] || !candidate(i, j)) continue;
        std::size_t count = 0;
        double peak = -1e300;
        stack.assign(1, {i, j});
        seen[static_cast<std::size_t>(j) * d.x + i] = 1;
        while (!stack.empty()) {
          const auto [x, y] = stack.back();
          stack.pop_back();
          ++count;
          peak = std::max<double>(peak, volume.at(x, y, k));
          for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              const int nx = x + dx, ny = y + dy;
              if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= d.x || ny >= d.y) continue;
              auto& s = seen[static_cast<std::size_t>(ny) * d.x + nx];
              if (s || !candidate(nx, ny)) continue;
              s = 1;
              stack.push_back({nx, ny});
            }
          }
        }
        const double area = static_cast<double>(count) * pixel_area;
        if (area < cfg.min_lesion_area_mm2) continue;
        score += area * agatston_weight(peak, cfg);
      }
    }
  }
  return score;
}

}  // namespace chestprog::clinical
