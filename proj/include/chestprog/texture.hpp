#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chestprog/volume.hpp"

namespace chestprog::texture {

/// In-mask voxels carry a level in [1, levels]; out-of-mask voxels are 0.
struct QuantizedRegion {
  Dims dims;
  std::vector<std::uint16_t> level;
  int levels = 0;
  Anatomy anatomy = Anatomy::kMuscle;
  std::size_t voxels = 0;

  bool empty() const noexcept { return voxels == 0; }
  std::uint16_t at(int i, int j, int k) const noexcept { return level[dims.index(i, j, k)]; }
};

struct HuWindow {
  double lo = 0.0;
  double hi = 1.0;
};

/// Equal-width binning: level = 1 + floor((clamp(v) - lo) * G / (hi - lo)), v == hi -> G.
/// Without a window the in-mask (min, max) is used; a constant region gets (v, v + 1),
/// so every voxel lands in level 1. Empty masks yield an empty region.
QuantizedRegion quantize(const Volume& volume, const AnatomyMask& mask, int levels,
                         std::optional<HuWindow> window = std::nullopt);

struct Direction {
  int dx = 0;
  int dy = 0;
  int dz = 0;
  bool operator==(const Direction&) const = default;
  auto operator<=>(const Direction&) const = default;
};

/// The 13 unique 3D neighbour directions (one of each +/- pair).
const std::array<Direction, 13>& unique_directions();

enum class MatrixKind { kGlcm, kGlrlm, kGlszm, kMglszm };

std::string_view to_string(MatrixKind kind);

/// Dense row-major matrix. Row r-1 holds gray level r; for GLRLM/GLSZM column c-1 holds
/// run length / zone size c. `units` is the number of runs/zones (pairs for GLCM) and
/// `voxels` the in-mask voxel count, both used by the percentage statistics.
struct TextureMatrix {
  MatrixKind kind = MatrixKind::kGlcm;
  int rows = 0;
  int cols = 0;
  std::vector<double> entries;
  double units = 0.0;
  double voxels = 0.0;

  double& operator()(int r, int c) { return entries[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return entries[static_cast<std::size_t>(r) * cols + c]; }
  double total() const;
};

/// Co-occurrence counts for offset distance*direction; both voxels must be in-mask.
/// Each ordered pair increments (r, c) and (c, r).
TextureMatrix glcm(const QuantizedRegion& region, int distance, Direction direction);

/// Longest lattice line along `direction` within `dims`.
int max_run_length(const Dims& dims, Direction direction);

/// Maximal in-mask runs of equal level along `direction`. Shape levels x max_run_length.
TextureMatrix glrlm(const QuantizedRegion& region, Direction direction);

enum class Connectivity {
  kSlice8,  // 8-connected within an axial slice
  kFull26,  // 26-connected in 3D
};

/// Connected equal-level zones. Shape levels x (largest zone size, at least 1).
TextureMatrix glszm(const QuantizedRegion& region, Connectivity connectivity = Connectivity::kSlice8);

/// sum_i weight_i * normalize(GLSZM quantized at level_set[i]), zero-padded to a common shape.
TextureMatrix mglszm(const Volume& volume, const AnatomyMask& mask, std::span<const int> level_set,
                     std::span<const double> weights, std::optional<HuWindow> window = std::nullopt,
                     Connectivity connectivity = Connectivity::kSlice8);

struct NamedValue {
  std::string name;
  std::optional<double> value;  // nullopt marks the empty-region sentinel
};
using FeatureVector = std::vector<NamedValue>;

/// Statistic names emitted for each matrix kind, in output order.
std::span<const std::string_view> statistic_names(MatrixKind kind);

/// Statistics of the normalized matrix p = M / total (see texture_statistics.cpp for the
/// formulas). A zero-total matrix yields sentinels for every statistic.
FeatureVector texture_statistics(const TextureMatrix& matrix);

/// Direction-averaged statistics. Directions are processed in canonical (sorted) order so
/// the result does not depend on the order they are listed in; directions whose matrix is
/// empty are skipped.
FeatureVector glcm_features(const QuantizedRegion& region, std::span<const Direction> directions,
                            int distance = 1);
FeatureVector glrlm_features(const QuantizedRegion& region, std::span<const Direction> directions);

}  // namespace chestprog::texture
