#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "chestprog/volume.hpp"

namespace chestprog::synthio {

/// Disease signatures injected into a case phantom. Documented ranges:
///   calcification_density   [0, 0.1]   fraction of aorta/heart voxels seeding a 2x2 focus
///   vertebral_hu_reduction  [0, 300]   HU subtracted from the spinal column
///   emphysema_fraction      [0, 0.9]   fraction of lung voxels set below -950 HU
///   heart_enlargement       [1, 1.5]   heart volume factor
struct Signatures {
  double calcification_density = 0.02;
  double vertebral_hu_reduction = 100.0;
  double emphysema_fraction = 0.2;
  double heart_enlargement = 1.2;
};

struct PhantomSpec {
  std::uint64_t seed = 0;
  Dims dims{64, 64, 16};
  Spacing spacing{0.7, 0.7, 5.0};
  bool case_flag = false;
  Signatures signatures;
  double noise_sigma = 20.0;

  std::string id;  // empty -> "phantom-<seed>"
  int match_group = 0;
  std::int64_t censor_days = 1825;
};

/// Mean HU per tissue before per-subject offsets and noise.
struct TissueHu {
  static constexpr double kAir = -1000.0;
  static constexpr double kSoftTissue = 20.0;
  static constexpr double kMuscle = 45.0;
  static constexpr double kBodyFat = -100.0;
  static constexpr double kAorta = 90.0;
  static constexpr double kSpinalColumn = 280.0;
  static constexpr double kEpicardialFat = -80.0;
  static constexpr double kHeart = 45.0;
  static constexpr double kLungs = -850.0;
};

void validate(const PhantomSpec& spec);

/// Deterministic synthetic chest phantom. Layout (relative to the lattice, voxel centres):
/// body ellipse (0.45, 0.35) holding a body_fat shell and a muscle shell, two lung
/// ellipsoids, heart ellipsoid with an epicardial fat shell, an aorta tube and a spinal
/// column tube. Masks are disjoint; priority spine > aorta > heart > epicardial fat >
/// lungs > muscle > body fat.
StudyRecord generate_phantom(const PhantomSpec& spec);

/// `n_pairs` matched case/control specs. Pair p has match_group p; the case carries
/// signatures drawn around the Signatures defaults, the control none.
std::vector<PhantomSpec> signal_cohort(int n_pairs, Dims dims, std::uint64_t seed,
                                       Spacing spacing = {0.7, 0.7, 5.0});

}  // namespace chestprog::synthio
