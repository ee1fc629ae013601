#pragma once

// Random fixtures and brute-force oracles shared by the unit and acceptance tests.

#include <cstdint>
#include <deque>
#include <random>
#include <vector>

#include "chestprog/texture.hpp"
#include "chestprog/volume.hpp"

namespace chestprog::testkit {

inline Volume random_volume(Dims d, std::uint64_t seed, int lo = -1024, int hi = 3071) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(lo, hi);
  std::vector<std::int16_t> data(d.count());
  for (auto& v : data) v = static_cast<std::int16_t>(u(rng));
  return Volume(d, {0.7, 0.8, 2.5}, std::move(data));
}

inline AnatomyMask random_mask(Dims d, std::uint64_t seed, double fill = 0.6, Anatomy a = Anatomy::kHeart) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution b(fill);
  std::vector<std::uint8_t> bits(d.count());
  for (auto& v : bits) v = b(rng) ? 1 : 0;
  return AnatomyMask(a, d, std::move(bits));
}

inline AnatomyMask full_mask(Dims d, Anatomy a = Anatomy::kHeart) {
  return AnatomyMask(a, d, std::vector<std::uint8_t>(d.count(), 1));
}

/// Region with levels drawn directly (bypasses quantize), in-mask with probability `fill`.
inline texture::QuantizedRegion random_region(Dims d, int levels, std::uint64_t seed, double fill = 0.7) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution in(fill);
  std::uniform_int_distribution<int> lv(1, levels);
  texture::QuantizedRegion r;
  r.dims = d;
  r.levels = levels;
  r.level.assign(d.count(), 0);
  for (auto& v : r.level)
    if (in(rng)) {
      v = static_cast<std::uint16_t>(lv(rng));
      ++r.voxels;
    }
  return r;
}

struct Voxel {
  int x, y, z;
};

inline std::vector<Voxel> all_voxels(const Dims& d) {
  std::vector<Voxel> v;
  for (int k = 0; k < d.z; ++k)
    for (int j = 0; j < d.y; ++j)
      for (int i = 0; i < d.x; ++i) v.push_back({i, j, k});
  return v;
}

/// O(n^2): every ordered voxel pair whose offset equals distance * a.
inline std::vector<std::vector<long>> brute_glcm(const texture::QuantizedRegion& r, int distance,
                                                 texture::Direction a) {
  std::vector<std::vector<long>> m(r.levels, std::vector<long>(r.levels, 0));
  const auto vox = all_voxels(r.dims);
  for (const auto& p : vox)
    for (const auto& q : vox) {
      if (q.x - p.x != distance * a.dx || q.y - p.y != distance * a.dy || q.z - p.z != distance * a.dz) continue;
      const int lp = r.at(p.x, p.y, p.z), lq = r.at(q.x, q.y, q.z);
      if (lp == 0 || lq == 0) continue;
      ++m[lp - 1][lq - 1];
      ++m[lq - 1][lp - 1];
    }
  return m;
}

/// Runs found from their first voxel: a voxel starts a run when its predecessor along a is
/// outside the lattice, out of mask or at another level.
inline std::vector<std::vector<long>> brute_glrlm(const texture::QuantizedRegion& r, texture::Direction a) {
  std::vector<std::vector<long>> m(r.levels);
  const Dims& d = r.dims;
  for (const auto& p : all_voxels(d)) {
    const int l = r.at(p.x, p.y, p.z);
    if (l == 0) continue;
    const int px = p.x - a.dx, py = p.y - a.dy, pz = p.z - a.dz;
    if (d.contains(px, py, pz) && r.at(px, py, pz) == l) continue;
    int len = 0;
    for (int x = p.x, y = p.y, z = p.z; d.contains(x, y, z) && r.at(x, y, z) == l; x += a.dx, y += a.dy, z += a.dz)
      ++len;
    auto& row = m[l - 1];
    if (row.size() < static_cast<std::size_t>(len)) row.resize(len, 0);
    ++row[len - 1];
  }
  return m;
}

/// Breadth-first flood fill over explicitly enumerated neighbours.
inline std::vector<std::vector<long>> brute_glszm(const texture::QuantizedRegion& r, bool full26) {
  const Dims& d = r.dims;
  std::vector<std::vector<long>> m(r.levels);
  std::vector<char> seen(d.count(), 0);
  for (const auto& s : all_voxels(d)) {
    const int l = r.at(s.x, s.y, s.z);
    if (l == 0 || seen[d.index(s.x, s.y, s.z)]) continue;
    long size = 0;
    std::deque<Voxel> q{s};
    seen[d.index(s.x, s.y, s.z)] = 1;
    while (!q.empty()) {
      const auto v = q.front();
      q.pop_front();
      ++size;
      for (int dz = full26 ? -1 : 0; dz <= (full26 ? 1 : 0); ++dz)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int x = v.x + dx, y = v.y + dy, z = v.z + dz;
            if (!d.contains(x, y, z) || seen[d.index(x, y, z)] || r.at(x, y, z) != l) continue;
            seen[d.index(x, y, z)] = 1;
            q.push_back({x, y, z});
          }
    }
    auto& row = m[l - 1];
    if (row.size() < static_cast<std::size_t>(size)) row.resize(size, 0);
    ++row[size - 1];
  }
  return m;
}

/// Exact comparison of an oracle (ragged rows, missing entries are 0) with a matrix.
inline bool same_counts(const std::vector<std::vector<long>>& oracle, const texture::TextureMatrix& m) {
  if (static_cast<int>(oracle.size()) != m.rows) return false;
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) {
      const long want = static_cast<std::size_t>(c) < oracle[r].size() ? oracle[r][c] : 0;
      if (m(r, c) != static_cast<double>(want)) return false;
    }
  for (int r = 0; r < m.rows; ++r)
    for (std::size_t c = static_cast<std::size_t>(m.cols); c < oracle[r].size(); ++c)
      if (oracle[r][c] != 0) return false;
  return true;
}

}  // namespace chestprog::testkit

#include <filesystem>
#include <string>
#include <unistd.h>

namespace chestprog::testkit {

/// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("chestprog-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

}  // namespace chestprog::testkit

#include <span>

namespace chestprog::testkit {

/// O(n^2) pairwise count: P(score_case > score_control) + 0.5 P(tie).
inline double mann_whitney_auc(std::span<const double> s, std::span<const int> y) {
  long double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1;
      wins += s[i] > s[j] ? 1.0L : s[i] == s[j] ? 0.5L : 0.0L;
    }
  }
  return static_cast<double>(wins / pairs);
}

/// Cohort metadata of `pairs` matched pairs, case first in each pair.
inline std::vector<StudyMeta> paired_meta(int pairs) {
  std::vector<StudyMeta> m;
  for (int p = 0; p < pairs; ++p) {
    m.push_back({"case" + std::to_string(p), 1, 900, p});
    m.push_back({"ctrl" + std::to_string(p), 0, 1825, p});
  }
  return m;
}

}  // namespace chestprog::testkit
