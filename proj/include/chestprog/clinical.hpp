#pragma once

#include <array>
#include <optional>

#include "chestprog/volume.hpp"

namespace chestprog::clinical {

struct ClinicalScoreConfig {
  double emphysema_threshold = -950.0;
  double calcium_threshold = 130.0;
  /// Peak-HU cutpoints: peak < b0 -> weight 1, < b1 -> 2, < b2 -> 3, else 4.
  std::array<double, 3> calcium_weight_bands = {200.0, 300.0, 400.0};
  double min_lesion_area_mm2 = 1.0;
};

/// Throws unless emphysema < calcium threshold < bands, bands strictly increasing, area >= 0.
void validate(const ClinicalScoreConfig& cfg);

/// Mean HU over the spinal column mask. nullopt on an empty mask.
std::optional<double> bmd_score(const Volume& volume, const AnatomyMask& spinal_column);

enum class Side { kBelow, kAtOrAbove };

/// Fraction of in-mask voxels strictly below (or at/above) `threshold`.
std::optional<double> attenuation_fraction(const Volume& volume, const AnatomyMask& mask,
                                           double threshold, Side side);

/// Low-attenuation area fraction of the lungs (HU < emphysema_threshold).
std::optional<double> emphysema_score(const Volume& volume, const AnatomyMask& lungs,
                                      const ClinicalScoreConfig& cfg = {});

int agatston_weight(double peak_hu, const ClinicalScoreConfig& cfg);

/// Agatston-style score: per axial slice, 8-connected in-mask components with
/// HU >= calcium_threshold; lesions under min_lesion_area are dropped; each remaining
/// lesion adds area_mm2 * weight(peak HU). Uses the volume's in-plane spacing.
std::optional<double> calcium_score(const Volume& volume, const AnatomyMask& mask,
                                    const ClinicalScoreConfig& cfg = {});

}  // namespace chestprog::clinical
