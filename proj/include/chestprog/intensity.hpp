#pragma once

#include "chestprog/texture.hpp"
#include "chestprog/volume.hpp"

namespace chestprog::intensity {

using texture::FeatureVector;

/// mean, median, range, variance, skewness, kurtosis, energy, entropy.
/// Moments use raw in-mask HU with population convention; skewness and excess kurtosis
/// are 0 when the variance is 0. Energy and entropy (log2) come from a `bins`-bin
/// histogram spanning `range`. Empty mask -> sentinels.
FeatureVector intensity_statistics(const Volume& volume, const AnatomyMask& mask, int bins = 64,
                                   HuRange range = {});

/// centroid_{x,y,z}: intensity-weighted centroid (weights HU - min_in_mask, uniform when
/// those are all 0) normalized to the mask bounding box, 0.5 on a degenerate axis.
/// {x,y,z}_q{1..4}_mean: mean HU of the in-mask voxels split into four equal-count slabs
/// by that coordinate (ties in scan order). Empty mask -> sentinels.
FeatureVector spatial_context(const Volume& volume, const AnatomyMask& mask);

/// Mask volume in millilitres.
double anatomy_volume(const AnatomyMask& mask, const Spacing& spacing);

}  // namespace chestprog::intensity
