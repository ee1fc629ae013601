#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chestprog/clinical.hpp"
#include "chestprog/texture.hpp"
#include "chestprog/volume.hpp"

namespace chestprog::radiomics {

enum class Extractor {
  kIntensity,
  kSpatial,
  kShape,
  kGlcm,
  kGlrlm,
  kGlszm,
  kMglszm,
  kBmd,
  kEmphysema,
  kCalcium,
};

std::string_view to_string(Extractor e);

struct CatalogParams {
  int levels = 32;
  int histogram_bins = 64;
  HuRange hu_range;
  std::optional<texture::HuWindow> texture_window;  // nullopt: per-anatomy in-mask (min, max)
  int glcm_distance = 1;
  texture::Connectivity connectivity = texture::Connectivity::kSlice8;
  std::vector<int> mglszm_levels = {8, 16, 32, 64};
  std::vector<double> mglszm_weights;  // empty: equal weights
  clinical::ClinicalScoreConfig clinical;
};

nlohmann::json to_json(const CatalogParams& p);
CatalogParams catalog_params_from_json(const nlohmann::json& j);

struct CatalogEntry {
  std::string name;
  Anatomy anatomy = Anatomy::kMuscle;
  Extractor extractor = Extractor::kIntensity;
  std::string statistic;
};

/// Ordered feature list plus the parameters it was built with. `version` is derived
/// from both, so any change to the list or parameters changes it.
struct FeatureCatalog {
  std::vector<CatalogEntry> entries;
  CatalogParams params;
  std::string version;

  std::vector<std::string> names() const;
};

/// Uniform per-anatomy block (intensity, spatial, shape, GLCM, GLRLM, GLSZM, MGLSZM) for
/// all seven anatomies, followed by the clinical scores:
///   clinical.spinal_column.bmd, clinical.lungs.emphysema_laa,
///   clinical.aorta.calcium_agatston, clinical.heart.calcium_agatston.
/// Per-anatomy names read "<anatomy>.<extractor>.<statistic>".
FeatureCatalog default_catalog(const CatalogParams& params = {});

/// Recomputes the version string for an entry list and parameter set.
std::string catalog_version(const std::vector<CatalogEntry>& entries, const CatalogParams& params);

/// One finite value per catalog entry, in catalog order. Sentinels (empty regions) become 0
/// and are reported through `warnings` when supplied.
std::vector<double> extract_features(const StudyRecord& study, const FeatureCatalog& catalog,
                                     std::vector<std::string>* warnings = nullptr);

/// Rows in study order; studies may be processed concurrently.
FeatureTable extract_table(const std::vector<StudyRecord>& studies, const FeatureCatalog& catalog,
                           int threads = 1, std::vector<std::string>* warnings = nullptr);

// Feature table on disk: CSV (first column "study_id", header = catalog names, shortest
// round-trip decimals) and a sidecar "<csv>.meta.json" holding the catalog version, its
// parameters and per-study label / censor_days / match_group.
void write_feature_table(const FeatureTable& table, const std::filesystem::path& csv,
                         const nlohmann::json& catalog_params);
FeatureTable read_feature_table(const std::filesystem::path& csv);
std::filesystem::path sidecar_path(const std::filesystem::path& csv);

}  // namespace chestprog::radiomics
