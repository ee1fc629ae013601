#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "chestprog/intensity.hpp"
#include "chestprog/phantom.hpp"
#include "test_support.hpp"

using namespace chestprog;
using namespace chestprog::intensity;

namespace {

double get(const texture::FeatureVector& fv, std::string_view name) {
  for (const auto& nv : fv)
    if (nv.name == name) return nv.value.value();
  ADD_FAILURE() << "missing feature " << name;
  return std::nan("");
}

Volume from_values(Dims d, std::vector<std::int16_t> v, Spacing s = {}) { return Volume(d, s, std::move(v)); }

}  // namespace

TEST(IntensityStatistics, ConstantRegion) {
  const Dims d{4, 3, 2};
  const auto v = from_values(d, std::vector<std::int16_t>(d.count(), 100));
  const auto fv = intensity_statistics(v, testkit::full_mask(d));
  EXPECT_EQ(get(fv, "mean"), 100.0);
  EXPECT_EQ(get(fv, "median"), 100.0);
  EXPECT_EQ(get(fv, "range"), 0.0);
  EXPECT_EQ(get(fv, "variance"), 0.0);
  EXPECT_EQ(get(fv, "skewness"), 0.0);
  EXPECT_EQ(get(fv, "kurtosis"), 0.0);
  EXPECT_EQ(get(fv, "energy"), 1.0);
  EXPECT_EQ(get(fv, "entropy"), 0.0);
}

TEST(IntensityStatistics, TwoVoxelsByHand) {
  const Dims d{2, 1, 1};
  const auto fv = intensity_statistics(from_values(d, {0, 10}), testkit::full_mask(d));
  EXPECT_EQ(get(fv, "mean"), 5.0);
  EXPECT_EQ(get(fv, "median"), 5.0);
  EXPECT_EQ(get(fv, "range"), 10.0);
  EXPECT_EQ(get(fv, "variance"), 25.0);
  EXPECT_EQ(get(fv, "skewness"), 0.0);
  EXPECT_EQ(get(fv, "kurtosis"), -2.0);
}

TEST(IntensityStatistics, RandomRegionMatchesRecomputation) {
  const Dims d{7, 6, 5};
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto v = testkit::random_volume(d, seed, -300, 500);
    const auto m = testkit::random_mask(d, seed + 100, 0.5);
    std::vector<double> x;
    for (std::size_t i = 0; i < d.count(); ++i)
      if (m.test(i)) x.push_back(v[i]);
    long double mean = 0;
    for (double a : x) mean += a;
    mean /= x.size();
    long double m2 = 0, m3 = 0, m4 = 0;
    for (double a : x) {
      const long double e = a - mean;
      m2 += e * e;
      m3 += e * e * e;
      m4 += e * e * e * e;
    }
    m2 /= x.size();
    m3 /= x.size();
    m4 /= x.size();
    std::sort(x.begin(), x.end());
    const double median = x.size() % 2 ? x[x.size() / 2] : (x[x.size() / 2 - 1] + x[x.size() / 2]) / 2;
    const auto fv = intensity_statistics(v, m);
    EXPECT_NEAR(get(fv, "mean"), static_cast<double>(mean), 1e-10);
    EXPECT_NEAR(get(fv, "median"), median, 1e-10);
    EXPECT_NEAR(get(fv, "range"), x.back() - x.front(), 1e-10);
    EXPECT_NEAR(get(fv, "variance") / static_cast<double>(m2), 1.0, 1e-10);
    EXPECT_NEAR(get(fv, "skewness"), static_cast<double>(m3 / std::pow(m2, 1.5L)), 1e-10);
    EXPECT_NEAR(get(fv, "kurtosis"), static_cast<double>(m4 / (m2 * m2) - 3), 1e-10);
  }
}

TEST(IntensityStatistics, HistogramEntropyOfTwoBins) {
  // -1024 and 3071 land in the first and last of 64 bins.
  const Dims d{4, 1, 1};
  const auto fv = intensity_statistics(from_values(d, {-1024, -1024, 3071, 3071}), testkit::full_mask(d));
  EXPECT_DOUBLE_EQ(get(fv, "entropy"), 1.0);
  EXPECT_DOUBLE_EQ(get(fv, "energy"), 0.5);
}

TEST(IntensityStatistics, ShiftInvariance) {
  const Dims d{6, 5, 4};
  const auto v = testkit::random_volume(d, 3, -200, 200);
  std::vector<std::int16_t> shifted(v.data().begin(), v.data().end());
  for (auto& s : shifted) s = static_cast<std::int16_t>(s + 37);
  const auto m = testkit::random_mask(d, 4);
  const auto a = intensity_statistics(v, m);
  const auto b = intensity_statistics(from_values(d, shifted, v.spacing()), m);
  EXPECT_NEAR(get(b, "mean") - get(a, "mean"), 37.0, 1e-9);
  EXPECT_EQ(get(b, "median") - get(a, "median"), 37.0);
  for (auto n : {"range", "variance", "skewness", "kurtosis"}) EXPECT_NEAR(get(a, n), get(b, n), 1e-9) << n;
}

TEST(IntensityStatistics, EmptyMaskGivesSentinels) {
  const Dims d{3, 3, 3};
  const auto fv = intensity_statistics(testkit::random_volume(d, 1),
                                       AnatomyMask(Anatomy::kAorta, d, std::vector<std::uint8_t>(27, 0)));
  ASSERT_EQ(fv.size(), 8u);
  for (const auto& nv : fv) EXPECT_FALSE(nv.value.has_value());
}

TEST(IntensityStatistics, DimsMismatchThrows) {
  EXPECT_THROW(intensity_statistics(testkit::random_volume({3, 3, 3}, 1), testkit::full_mask({3, 3, 2})), Error);
}

TEST(SpatialContext, UniformSymmetricMaskIsCentred) {
  const Dims d{5, 7, 3};
  const auto fv = spatial_context(from_values(d, std::vector<std::int16_t>(d.count(), 40)), testkit::full_mask(d));
  ASSERT_EQ(fv.size(), 15u);
  EXPECT_DOUBLE_EQ(get(fv, "centroid_x"), 0.5);
  EXPECT_DOUBLE_EQ(get(fv, "centroid_y"), 0.5);
  EXPECT_DOUBLE_EQ(get(fv, "centroid_z"), 0.5);
  for (char a : {'x', 'y', 'z'})
    for (int q = 1; q <= 4; ++q) EXPECT_EQ(get(fv, std::string(1, a) + "_q" + std::to_string(q) + "_mean"), 40.0);
}

TEST(SpatialContext, LinearRampAlongX) {
  const Dims d{8, 3, 2};
  std::vector<std::int16_t> v(d.count());
  for (int k = 0; k < d.z; ++k)
    for (int j = 0; j < d.y; ++j)
      for (int i = 0; i < d.x; ++i) v[d.index(i, j, k)] = static_cast<std::int16_t>(10 * i);
  const auto fv = spatial_context(from_values(d, v), testkit::full_mask(d));
  // Weights 10 i: centroid sum i^2 / sum i = 140 / 28 = 5 over extent 7.
  EXPECT_DOUBLE_EQ(get(fv, "centroid_x"), 5.0 / 7.0);
  EXPECT_DOUBLE_EQ(get(fv, "x_q1_mean"), 5.0);
  EXPECT_DOUBLE_EQ(get(fv, "x_q2_mean"), 25.0);
  EXPECT_DOUBLE_EQ(get(fv, "x_q3_mean"), 45.0);
  EXPECT_DOUBLE_EQ(get(fv, "x_q4_mean"), 65.0);
  EXPECT_DOUBLE_EQ(get(fv, "centroid_y"), 0.5);
}

TEST(SpatialContext, SingleVoxel) {
  const Dims d{4, 4, 4};
  std::vector<std::uint8_t> bits(d.count(), 0);
  bits[d.index(1, 2, 3)] = 1;
  const auto v = testkit::random_volume(d, 9);
  const auto fv = spatial_context(v, AnatomyMask(Anatomy::kAorta, d, bits));
  for (char a : {'x', 'y', 'z'}) {
    EXPECT_EQ(get(fv, std::string("centroid_") + a), 0.5);
    for (int q = 1; q <= 4; ++q)
      EXPECT_EQ(get(fv, std::string(1, a) + "_q" + std::to_string(q) + "_mean"), v.at(1, 2, 3));
  }
}

TEST(SpatialContext, EmptyMaskGivesSentinels) {
  const Dims d{2, 2, 2};
  const auto fv = spatial_context(testkit::random_volume(d, 1), AnatomyMask(Anatomy::kAorta, d, std::vector<std::uint8_t>(8, 0)));
  for (const auto& nv : fv) EXPECT_FALSE(nv.value.has_value());
}

TEST(AnatomyVolume, UnitAndZeroCases) {
  const Dims d{10, 10, 10};
  EXPECT_DOUBLE_EQ(anatomy_volume(testkit::full_mask(d), Spacing{1, 1, 1}), 1.0);
  EXPECT_EQ(anatomy_volume(AnatomyMask(Anatomy::kHeart, d, std::vector<std::uint8_t>(1000, 0)), Spacing{}), 0.0);
  EXPECT_DOUBLE_EQ(anatomy_volume(testkit::full_mask(d), Spacing{0.5, 0.5, 2.0}), 0.5);
}

TEST(AnatomyVolume, PhantomHeartEnlargement) {
  for (double f : {1.1, 1.3, 1.5}) {
    synthio::PhantomSpec base;
    base.seed = 21;
    base.dims = {96, 96, 24};
    auto enlarged = base;
    enlarged.case_flag = true;
    enlarged.signatures.heart_enlargement = f;
    const auto a = generate_phantom(base), b = generate_phantom(enlarged);
    const double va = anatomy_volume(a.mask(Anatomy::kHeart), a.volume().spacing());
    const double vb = anatomy_volume(b.mask(Anatomy::kHeart), b.volume().spacing());
    EXPECT_NEAR(vb / va, f, 0.05 * f) << f;
  }
}
