#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "chestprog/volume.hpp"

namespace chestprog::synthio {

/// One manifest row. Paths are stored relative to the manifest's directory.
struct ManifestEntry {
  std::string id;
  std::filesystem::path volume;
  std::map<Anatomy, std::filesystem::path> masks;
  int label = 0;
  std::int64_t censor_days = 0;
  int match_group = 0;
};

// Manifest JSON:
//   { "format": "chestprog-manifest", "version": 1,
//     "studies": [ { "id", "volume", "masks": { <anatomy>: <path>, ... x7 },
//                    "label", "censor_days", "match_group" }, ... ] }

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path);

/// Reads every referenced file. Errors name the study id (and anatomy for masks).
std::vector<StudyRecord> load_manifest(const std::filesystem::path& path, HuRange clamp = {},
                                       int threads = 1);

/// Writes each study under `dir/<id>/` plus `dir/manifest.json`; returns the manifest path.
std::filesystem::path write_cohort(const std::vector<StudyRecord>& studies,
                                   const std::filesystem::path& dir);

}  // namespace chestprog::synthio
