#include "chestprog/texture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace chestprog::texture {

QuantizedRegion quantize(const Volume& volume, const AnatomyMask& mask, int levels,
                         std::optional<HuWindow> window) {
  require_same_dims(volume, mask);
  if (levels < 2 || levels > std::numeric_limits<std::uint16_t>::max()) {
    throw Error(ErrorCode::kInvalidArgument, "quantization needs at least 2 levels");
  }
  QuantizedRegion region{volume.dims(), std::vector<std::uint16_t>(volume.dims().count(), 0), levels,
                         mask.anatomy(), mask.popcount()};
  if (region.empty()) return region;

  HuWindow w;
  if (window) {
    w = *window;
    if (!(w.lo < w.hi)) throw Error(ErrorCode::kInvalidArgument, "HU window needs lo < hi");
  } else {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t idx = 0; idx < region.level.size(); ++idx) {
      if (!mask.test(idx)) continue;
      lo = std::min<double>(lo, volume[idx]);
      hi = std::max<double>(hi, volume[idx]);
    }
    w = {lo, hi > lo ? hi : lo + 1.0};
  }
  for (std::size_t idx = 0; idx < region.level.size(); ++idx) {
    if (!mask.test(idx)) continue;
    const double v = std::clamp<double>(volume[idx], w.lo, w.hi);
    const int lev = 1 + static_cast<int>(std::floor((v - w.lo) * levels / (w.hi - w.lo)));
    region.level[idx] = static_cast<std::uint16_t>(std::min(lev, levels));
  }
  return region;
}

const std::array<Direction, 13>& unique_directions() {
  static const std::array<Direction, 13> dirs = {{{1, 0, 0},
                                                  {0, 1, 0},
                                                  {0, 0, 1},
                                                  {1, 1, 0},
                                                  {1, -1, 0},
                                                  {1, 0, 1},
                                                  {1, 0, -1},
                                                  {0, 1, 1},
                                                  {0, 1, -1},
                                                  {1, 1, 1},
                                                  {1, 1, -1},
                                                  {1, -1, 1},
                                                  {1, -1, -1}}};
  return dirs;
}

std::string_view to_string(MatrixKind kind) {
  switch (kind) {
    case MatrixKind::kGlcm: return "glcm";
    case MatrixKind::kGlrlm: return "glrlm";
    case MatrixKind::kGlszm: return "glszm";
    case MatrixKind::kMglszm: return "mglszm";
  }
  return "?";
}

double TextureMatrix::total() const { return std::accumulate(entries.begin(), entries.end(), 0.0); }

namespace {

// Valid start range for an axis offset o over extent n: [max(0, -o), min(n, n - o)).
std::pair<int, int> offset_range(int n, int o) { return {std::max(0, -o), std::min(n, n - o)}; }

void check_direction(Direction a) {
  if (a.dx == 0 && a.dy == 0 && a.dz == 0) {
    throw Error(ErrorCode::kInvalidArgument, "direction must be nonzero");
  }
}

}  // namespace

TextureMatrix glcm(const QuantizedRegion& region, int distance, Direction direction) {
  check_direction(direction);
  if (distance < 1) throw Error(ErrorCode::kInvalidArgument, "GLCM distance must be >= 1");
  const int g = region.levels;
  TextureMatrix m{MatrixKind::kGlcm, g, g, std::vector<double>(static_cast<std::size_t>(g) * g, 0.0),
                  0.0, static_cast<double>(region.voxels)};
  if (region.empty()) return m;

  const Dims& d = region.dims;
  const int ox = direction.dx * distance, oy = direction.dy * distance, oz = direction.dz * distance;
  const auto [i0, i1] = offset_range(d.x, ox);
  const auto [j0, j1] = offset_range(d.y, oy);
  const auto [k0, k1] = offset_range(d.z, oz);
  const std::ptrdiff_t shift = (static_cast<std::ptrdiff_t>(oz) * d.y + oy) * d.x + ox;

  std::vector<std::int64_t> counts(static_cast<std::size_t>(g) * g, 0);
  const std::uint16_t* lv = region.level.data();
  for (int k = k0; k < k1; ++k) {
    for (int j = j0; j < j1; ++j) {
      const std::size_t row = d.index(0, j, k);
      for (int i = i0; i < i1; ++i) {
        const std::size_t a = row + i;
        const std::uint16_t r = lv[a];
        const std::uint16_t c = lv[static_cast<std::ptrdiff_t>(a) + shift];
        if (r != 0 && c != 0) ++counts[static_cast<std::size_t>(r - 1) * g + (c - 1)];
      }
    }
  }
  std::int64_t pairs = 0;
  for (int r = 0; r < g; ++r) {
    for (int c = 0; c < g; ++c) {
      const auto n = counts[static_cast<std::size_t>(r) * g + c];
      pairs += n;
      m(r, c) += static_cast<double>(n);
      m(c, r) += static_cast<double>(n);
    }
  }
  m.units = static_cast<double>(pairs);
  return m;
}

int max_run_length(const Dims& dims, Direction a) {
  check_direction(a);
  int n = std::numeric_limits<int>::max();
  if (a.dx != 0) n = std::min(n, (dims.x + std::abs(a.dx) - 1) / std::abs(a.dx));
  if (a.dy != 0) n = std::min(n, (dims.y + std::abs(a.dy) - 1) / std::abs(a.dy));
  if (a.dz != 0) n = std::min(n, (dims.z + std::abs(a.dz) - 1) / std::abs(a.dz));
  return n;
}

TextureMatrix glrlm(const QuantizedRegion& region, Direction a) {
  const int lmax = max_run_length(region.dims, a);
  const int g = region.levels;
  TextureMatrix m{MatrixKind::kGlrlm, g, lmax,
                  std::vector<double>(static_cast<std::size_t>(g) * lmax, 0.0), 0.0,
                  static_cast<double>(region.voxels)};
  if (region.empty()) return m;

  const Dims& d = region.dims;
  std::int64_t runs = 0;
  for (int k = 0; k < d.z; ++k) {
    for (int j = 0; j < d.y; ++j) {
      for (int i = 0; i < d.x; ++i) {
        // Only lattice-line starts: the predecessor falls outside the grid.
        if (d.contains(i - a.dx, j - a.dy, k - a.dz)) continue;
        std::uint16_t cur = 0;
        int len = 0;
        for (int x = i, y = j, z = k; d.contains(x, y, z); x += a.dx, y += a.dy, z += a.dz) {
          const std::uint16_t lev = region.level[d.index(x, y, z)];
          if (lev == cur && lev != 0) {
            ++len;
            continue;
          }
          if (cur != 0) {
            m(cur - 1, len - 1) += 1.0;
            ++runs;
          }
          cur = lev;
          len = lev != 0 ? 1 : 0;
        }
        if (cur != 0) {
          m(cur - 1, len - 1) += 1.0;
          ++runs;
        }
      }
    }
  }
  m.units = static_cast<double>(runs);
  return m;
}

namespace {

struct DisjointSet {
  std::vector<std::uint32_t> parent;
  explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0u); }
  std::uint32_t find(std::uint32_t v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent[a] = b;
  }
};

// Neighbours already visited in x-fastest scan order.
std::vector<std::array<int, 3>> backward_neighbours(Connectivity c) {
  std::vector<std::array<int, 3>> out;
  const int zmin = c == Connectivity::kFull26 ? -1 : 0;
  for (int dz = zmin; dz <= 0; ++dz) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const bool before = dz < 0 || (dz == 0 && (dy < 0 || (dy == 0 && dx < 0)));
        if (before) out.push_back({dx, dy, dz});
      }
    }
  }
  return out;
}

}  // namespace

TextureMatrix glszm(const QuantizedRegion& region, Connectivity connectivity) {
  const int g = region.levels;
  TextureMatrix m{MatrixKind::kGlszm, g, 1, std::vector<double>(static_cast<std::size_t>(g), 0.0), 0.0,
                  static_cast<double>(region.voxels)};
  if (region.empty()) return m;

  const Dims& d = region.dims;
  DisjointSet ds(d.count());
  const auto nbrs = backward_neighbours(connectivity);
  for (int k = 0; k < d.z; ++k) {
    for (int j = 0; j < d.y; ++j) {
      for (int i = 0; i < d.x; ++i) {
        const auto idx = d.index(i, j, k);
        const auto lev = region.level[idx];
        if (lev == 0) continue;
        for (const auto& n : nbrs) {
          const int x = i + n[0], y = j + n[1], z = k + n[2];
          if (!d.contains(x, y, z)) continue;
          const auto nidx = d.index(x, y, z);
          if (region.level[nidx] == lev) {
            ds.unite(static_cast<std::uint32_t>(idx), static_cast<std::uint32_t>(nidx));
          }
        }
      }
    }
  }
  std::vector<std::uint32_t> size(d.count(), 0);
  for (std::size_t idx = 0; idx < d.count(); ++idx) {
    if (region.level[idx] != 0) ++size[ds.find(static_cast<std::uint32_t>(idx))];
  }
  int zmax = 1;
  for (auto s : size) zmax = std::max<int>(zmax, static_cast<int>(s));
  m.cols = zmax;
  m.entries.assign(static_cast<std::size_t>(g) * zmax, 0.0);
  std::int64_t zones = 0;
  for (std::size_t idx = 0; idx < d.count(); ++idx) {
    if (region.level[idx] != 0 && ds.find(static_cast<std::uint32_t>(idx)) == idx) {
      m(region.level[idx] - 1, static_cast<int>(size[idx]) - 1) += 1.0;
      ++zones;
    }
  }
  m.units = static_cast<double>(zones);
  return m;
}

TextureMatrix mglszm(const Volume& volume, const AnatomyMask& mask, std::span<const int> level_set,
                     std::span<const double> weights, std::optional<HuWindow> window,
                     Connectivity connectivity) {
  if (level_set.empty()) throw Error(ErrorCode::kInvalidArgument, "MGLSZM needs a non-empty level set");
  if (weights.size() != level_set.size()) {
    throw Error(ErrorCode::kInvalidArgument, "MGLSZM needs one weight per level count");
  }
  double wsum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "MGLSZM weights must be nonnegative");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-9) throw Error(ErrorCode::kInvalidArgument, "MGLSZM weights must sum to 1");

  std::vector<TextureMatrix> parts;
  int rows = 0, cols = 1;
  for (int g : level_set) {
    parts.push_back(glszm(quantize(volume, mask, g, window), connectivity));
    rows = std::max(rows, parts.back().rows);
    cols = std::max(cols, parts.back().cols);
  }
  TextureMatrix m{MatrixKind::kMglszm, rows, cols,
                  std::vector<double>(static_cast<std::size_t>(rows) * cols, 0.0), 0.0,
                  static_cast<double>(mask.popcount())};
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const double total = parts[p].total();
    if (total <= 0.0) continue;
    for (int r = 0; r < parts[p].rows; ++r) {
      for (int c = 0; c < parts[p].cols; ++c) m(r, c) += weights[p] * parts[p](r, c) / total;
    }
    m.units += weights[p] * parts[p].units;
  }
  return m;
}

}  // namespace chestprog::texture
