#include "chestprog/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "chestprog/intensity.hpp"
#include "chestprog/parallel.hpp"

namespace chestprog::radiomics {

using nlohmann::json;
using texture::FeatureVector;

std::string_view to_string(Extractor e) {
  switch (e) {
    case Extractor::kIntensity: return "intensity";
    case Extractor::kSpatial: return "spatial";
    case Extractor::kShape: return "shape";
    case Extractor::kGlcm: return "glcm";
    case Extractor::kGlrlm: return "glrlm";
    case Extractor::kGlszm: return "glszm";
    case Extractor::kMglszm: return "mglszm";
    case Extractor::kBmd: return "bmd";
    case Extractor::kEmphysema: return "emphysema_laa";
    case Extractor::kCalcium: return "calcium_agatston";
  }
  return "?";
}

json to_json(const CatalogParams& p) {
  json j = {{"levels", p.levels},
            {"histogram_bins", p.histogram_bins},
            {"hu_range", {p.hu_range.lo, p.hu_range.hi}},
            {"glcm_distance", p.glcm_distance},
            {"connectivity", p.connectivity == texture::Connectivity::kSlice8 ? "slice8" : "full26"},
            {"mglszm_levels", p.mglszm_levels},
            {"mglszm_weights", p.mglszm_weights},
            {"emphysema_threshold", p.clinical.emphysema_threshold},
            {"calcium_threshold", p.clinical.calcium_threshold},
            {"calcium_weight_bands", p.clinical.calcium_weight_bands},
            {"min_lesion_area_mm2", p.clinical.min_lesion_area_mm2}};
  if (p.texture_window) {
    j["texture_window"] = {p.texture_window->lo, p.texture_window->hi};
  } else {
    j["texture_window"] = nullptr;
  }
  return j;
}

CatalogParams catalog_params_from_json(const json& j) {
  CatalogParams p;
  p.levels = j.at("levels");
  p.histogram_bins = j.at("histogram_bins");
  p.hu_range = {j.at("hu_range")[0], j.at("hu_range")[1]};
  p.glcm_distance = j.at("glcm_distance");
  p.connectivity = j.at("connectivity") == "full26" ? texture::Connectivity::kFull26 : texture::Connectivity::kSlice8;
  p.mglszm_levels = j.at("mglszm_levels").get<std::vector<int>>();
  p.mglszm_weights = j.at("mglszm_weights").get<std::vector<double>>();
  p.clinical.emphysema_threshold = j.at("emphysema_threshold");
  p.clinical.calcium_threshold = j.at("calcium_threshold");
  p.clinical.calcium_weight_bands = j.at("calcium_weight_bands");
  p.clinical.min_lesion_area_mm2 = j.at("min_lesion_area_mm2");
  if (!j.at("texture_window").is_null()) {
    p.texture_window = texture::HuWindow{j["texture_window"][0], j["texture_window"][1]};
  }
  return p;
}

std::vector<std::string> FeatureCatalog::names() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.name);
  return out;
}

std::string catalog_version(const std::vector<CatalogEntry>& entries, const CatalogParams& params) {
  // FNV-1a over the entry names and the canonical parameter dump.
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    h ^= 0xff;
    h *= 1099511628211ull;
  };
  for (const auto& e : entries) mix(e.name);
  mix(to_json(params).dump());
  char buf[40];
  std::snprintf(buf, sizeof(buf), "cat1-%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::vector<int> validated_levels(const CatalogParams& p) {
  if (p.levels < 2) throw Error(ErrorCode::kInvalidArgument, "catalog levels must be >= 2");
  if (p.histogram_bins < 1) throw Error(ErrorCode::kInvalidArgument, "histogram bins must be >= 1");
  if (p.mglszm_levels.empty()) throw Error(ErrorCode::kInvalidArgument, "MGLSZM level set is empty");
  if (!p.mglszm_weights.empty() && p.mglszm_weights.size() != p.mglszm_levels.size()) {
    throw Error(ErrorCode::kInvalidArgument, "MGLSZM weights must match the level set");
  }
  clinical::validate(p.clinical);
  return p.mglszm_levels;
}

std::vector<double> mglszm_weights(const CatalogParams& p) {
  if (!p.mglszm_weights.empty()) return p.mglszm_weights;
  return std::vector<double>(p.mglszm_levels.size(), 1.0 / static_cast<double>(p.mglszm_levels.size()));
}

}  // namespace

FeatureCatalog default_catalog(const CatalogParams& params) {
  validated_levels(params);
  FeatureCatalog cat;
  cat.params = params;
  auto add_block = [&](Anatomy a, Extractor e, auto&& stat_names) {
    for (const auto& s : stat_names) {
      const std::string stat(s);
      cat.entries.push_back({std::string(to_string(a)) + "." + std::string(to_string(e)) + "." + stat, a, e, stat});
    }
  };
  const std::vector<std::string> intensity_names = {"mean",     "median",   "range",  "variance",
                                                    "skewness", "kurtosis", "energy", "entropy"};
  std::vector<std::string> spatial = {"centroid_x", "centroid_y", "centroid_z"};
  for (char axis : {'x', 'y', 'z'}) {
    for (int q = 1; q <= 4; ++q) spatial.push_back(std::string(1, axis) + "_q" + std::to_string(q) + "_mean");
  }
  for (Anatomy a : kAllAnatomies) {
    add_block(a, Extractor::kIntensity, intensity_names);
    add_block(a, Extractor::kSpatial, spatial);
    add_block(a, Extractor::kShape, std::vector<std::string>{"volume_ml"});
    add_block(a, Extractor::kGlcm, texture::statistic_names(texture::MatrixKind::kGlcm));
    add_block(a, Extractor::kGlrlm, texture::statistic_names(texture::MatrixKind::kGlrlm));
    add_block(a, Extractor::kGlszm, texture::statistic_names(texture::MatrixKind::kGlszm));
    add_block(a, Extractor::kMglszm, texture::statistic_names(texture::MatrixKind::kMglszm));
  }
  auto clinical_entry = [&](Anatomy a, Extractor e) {
    cat.entries.push_back({"clinical." + std::string(to_string(a)) + "." + std::string(to_string(e)), a, e,
                           std::string(to_string(e))});
  };
  clinical_entry(Anatomy::kSpinalColumn, Extractor::kBmd);
  clinical_entry(Anatomy::kLungs, Extractor::kEmphysema);
  clinical_entry(Anatomy::kAorta, Extractor::kCalcium);
  clinical_entry(Anatomy::kHeart, Extractor::kCalcium);
  cat.version = catalog_version(cat.entries, params);
  return cat;
}

std::vector<double> extract_features(const StudyRecord& study, const FeatureCatalog& catalog,
                                     std::vector<std::string>* warnings) {
  const auto& p = catalog.params;
  validated_levels(p);
  const auto weights = mglszm_weights(p);
  const auto& dirs = texture::unique_directions();
  const Volume& vol = study.volume();

  // Each (anatomy, extractor) group is computed once and looked up by statistic name.
  std::map<std::pair<Anatomy, Extractor>, FeatureVector> cache;
  std::map<Anatomy, texture::QuantizedRegion> regions;
  auto region = [&](Anatomy a) -> const texture::QuantizedRegion& {
    auto it = regions.find(a);
    if (it == regions.end()) {
      it = regions.emplace(a, texture::quantize(vol, study.mask(a), p.levels, p.texture_window)).first;
    }
    return it->second;
  };
  auto single = [](std::string name, std::optional<double> v) { return FeatureVector{{std::move(name), v}}; };
  auto compute = [&](Anatomy a, Extractor e) -> FeatureVector {
    const auto& mask = study.mask(a);
    switch (e) {
      case Extractor::kIntensity: return intensity::intensity_statistics(vol, mask, p.histogram_bins, p.hu_range);
      case Extractor::kSpatial: return intensity::spatial_context(vol, mask);
      case Extractor::kShape: return single("volume_ml", intensity::anatomy_volume(mask, vol.spacing()));
      case Extractor::kGlcm: return texture::glcm_features(region(a), dirs, p.glcm_distance);
      case Extractor::kGlrlm: return texture::glrlm_features(region(a), dirs);
      case Extractor::kGlszm: return texture::texture_statistics(texture::glszm(region(a), p.connectivity));
      case Extractor::kMglszm:
        return texture::texture_statistics(
            texture::mglszm(vol, mask, p.mglszm_levels, weights, p.texture_window, p.connectivity));
      case Extractor::kBmd: return single("bmd", clinical::bmd_score(vol, mask));
      case Extractor::kEmphysema: return single("emphysema_laa", clinical::emphysema_score(vol, mask, p.clinical));
      case Extractor::kCalcium: return single("calcium_agatston", clinical::calcium_score(vol, mask, p.clinical));
    }
    return {};
  };

  std::vector<double> row;
  row.reserve(catalog.entries.size());
  for (const auto& entry : catalog.entries) {
    try {
      const auto key = std::make_pair(entry.anatomy, entry.extractor);
      auto it = cache.find(key);
      if (it == cache.end()) it = cache.emplace(key, compute(entry.anatomy, entry.extractor)).first;
      const auto& fv = it->second;
      auto hit = std::find_if(fv.begin(), fv.end(), [&](const auto& nv) { return nv.name == entry.statistic; });
      if (hit == fv.end()) throw Error(ErrorCode::kExtraction, "unknown statistic '" + entry.statistic + "'");
      if (!hit->value) {
        if (warnings) warnings->push_back("study " + study.id() + ": " + entry.name + " has an empty region; using 0");
        row.push_back(0.0);
      } else if (!std::isfinite(*hit->value)) {
        throw Error(ErrorCode::kNonFinite, "non-finite value");
      } else {
        row.push_back(*hit->value);
      }
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kExtraction, "study " + study.id() + ", feature " + entry.name + ": " + e.what());
    }
  }
  return row;
}

FeatureTable extract_table(const std::vector<StudyRecord>& studies, const FeatureCatalog& catalog, int threads,
                           std::vector<std::string>* warnings) {
  std::vector<std::vector<double>> rows(studies.size());
  std::vector<std::vector<std::string>> notes(studies.size());
  parallel_for(studies.size(), threads,
               [&](std::size_t i) { rows[i] = extract_features(studies[i], catalog, &notes[i]); });
  Eigen::MatrixXd values(static_cast<Eigen::Index>(studies.size()),
                         static_cast<Eigen::Index>(catalog.entries.size()));
  std::vector<StudyMeta> meta;
  for (std::size_t i = 0; i < studies.size(); ++i) {
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
    }
    meta.push_back(meta_of(studies[i]));
    if (warnings) warnings->insert(warnings->end(), notes[i].begin(), notes[i].end());
  }
  FeatureTable table(catalog.names(), std::move(meta), std::move(values));
  table.catalog_version = catalog.version;
  return table;
}

}  // namespace chestprog::radiomics
