#include "chestprog/manifest.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "chestprog/parallel.hpp"
#include "chestprog/volume_io.hpp"

namespace chestprog::synthio {
namespace {

using nlohmann::json;

[[noreturn]] void manifest_error(const std::string& msg) { throw Error(ErrorCode::kManifest, msg); }

}  // namespace

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open manifest " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    manifest_error(path.string() + ": " + e.what());
  }
  if (doc.value("format", "") != "chestprog-manifest" || doc.value("version", 0) != 1) {
    manifest_error(path.string() + ": not a version-1 chestprog manifest");
  }
  std::vector<ManifestEntry> entries;
  std::set<std::string> ids;
  for (const auto& s : doc.at("studies")) {
    ManifestEntry e;
    try {
      e.id = s.at("id").get<std::string>();
      e.volume = s.at("volume").get<std::string>();
      e.label = s.at("label").get<int>();
      e.censor_days = s.at("censor_days").get<std::int64_t>();
      e.match_group = s.at("match_group").get<int>();
      for (const auto& [name, p] : s.at("masks").items()) {
        auto a = parse_anatomy(name);
        if (!a) manifest_error("study " + e.id + ": unknown anatomy '" + name + "'");
        e.masks[*a] = p.get<std::string>();
      }
    } catch (const json::exception& ex) {
      manifest_error("study " + (e.id.empty() ? std::string("<unnamed>") : e.id) + ": " + ex.what());
    }
    if (e.masks.size() != kAnatomyCount) {
      manifest_error("study " + e.id + ": expected 7 anatomy masks, found " +
                     std::to_string(e.masks.size()));
    }
    if (!ids.insert(e.id).second) manifest_error("duplicate study id " + e.id);
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path) {
  json studies = json::array();
  for (const auto& e : entries) {
    json masks = json::object();
    for (const auto& [a, p] : e.masks) masks[std::string(to_string(a))] = p.generic_string();
    studies.push_back({{"id", e.id},
                       {"volume", e.volume.generic_string()},
                       {"masks", masks},
                       {"label", e.label},
                       {"censor_days", e.censor_days},
                       {"match_group", e.match_group}});
  }
  json doc = {{"format", "chestprog-manifest"}, {"version", 1}, {"studies", studies}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write manifest " + path.string());
  out << doc.dump(2) << "\n";
}

std::vector<StudyRecord> load_manifest(const std::filesystem::path& path, HuRange clamp, int threads) {
  const auto entries = read_manifest(path);
  const auto base = path.parent_path();
  std::vector<StudyRecord> studies(entries.size());
  parallel_for(entries.size(), threads, [&](std::size_t i) {
    const auto& e = entries[i];
    const auto vol_path = base / e.volume;
    if (!std::filesystem::exists(vol_path)) {
      manifest_error("study " + e.id + ": volume file " + vol_path.string() + " does not exist");
    }
    Volume volume;
    try {
      volume = read_volume(vol_path, clamp);
    } catch (const Error& err) {
      throw Error(err.code(), "study " + e.id + ": " + err.what());
    }
    std::vector<AnatomyMask> masks;
    for (const auto& [a, rel] : e.masks) {
      const auto mp = base / rel;
      if (!std::filesystem::exists(mp)) {
        manifest_error("study " + e.id + ": " + std::string(to_string(a)) + " mask " + mp.string() +
                       " does not exist");
      }
      try {
        masks.push_back(read_mask(mp));
      } catch (const Error& err) {
        throw Error(err.code(), "study " + e.id + ", anatomy " + std::string(to_string(a)) + ": " + err.what());
      }
      if (masks.back().anatomy() != a) {
        manifest_error("study " + e.id + ": file for " + std::string(to_string(a)) + " holds " +
                       std::string(to_string(masks.back().anatomy())));
      }
    }
    try {
      studies[i] = StudyRecord(e.id, std::move(volume), std::move(masks), e.label, e.censor_days,
                               e.match_group);
    } catch (const Error& err) {
      throw Error(err.code(), "study " + e.id + ": " + err.what());
    }
  });
  return studies;
}

std::filesystem::path write_cohort(const std::vector<StudyRecord>& studies,
                                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<ManifestEntry> entries;
  for (const auto& s : studies) {
    const std::filesystem::path rel = s.id();
    std::filesystem::create_directories(dir / rel);
    ManifestEntry e{s.id(), rel / "volume.cpv", {}, s.label(), s.censor_days(), s.match_group()};
    write_volume(s.volume(), dir / e.volume);
    for (const auto& m : s.masks()) {
      const auto mp = rel / (std::string(to_string(m.anatomy())) + ".cpm");
      write_mask(m, dir / mp);
      e.masks[m.anatomy()] = mp;
    }
    entries.push_back(std::move(e));
  }
  const auto manifest = dir / "manifest.json";
  write_manifest(entries, manifest);
  return manifest;
}

}  // namespace chestprog::synthio
