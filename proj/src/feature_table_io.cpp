#include <fstream>
#include <map>
#include <sstream>

#include "chestprog/catalog.hpp"
#include "chestprog/text_format.hpp"

namespace chestprog::radiomics {

using nlohmann::json;

std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  return csv.string() + ".meta.json";
}

void write_feature_table(const FeatureTable& table, const std::filesystem::path& csv,
                         const json& catalog_params) {
  std::ofstream out(csv, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + csv.string());
  out << "study_id";
  for (const auto& n : table.column_names()) out << ',' << n;
  out << '\n';
  for (std::size_t r = 0; r < table.rows(); ++r) {
    out << table.studies()[r].id;
    for (Eigen::Index c = 0; c < table.values().cols(); ++c) {
      out << ',' << format_double(table.values()(static_cast<Eigen::Index>(r), c));
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "short write to " + csv.string());

  json studies = json::array();
  for (const auto& s : table.studies()) {
    studies.push_back({{"id", s.id}, {"label", s.label}, {"censor_days", s.censor_days}, {"match_group", s.match_group}});
  }
  json meta = {{"format", "chestprog-features"},
               {"version", 1},
               {"catalog_version", table.catalog_version},
               {"catalog_params", catalog_params},
               {"studies", studies}};
  std::ofstream side(sidecar_path(csv), std::ios::trunc);
  if (!side) throw Error(ErrorCode::kIo, "cannot write " + sidecar_path(csv).string());
  side << meta.dump(2) << '\n';
}

FeatureTable read_feature_table(const std::filesystem::path& csv) {
  std::ifstream side(sidecar_path(csv));
  if (!side) throw Error(ErrorCode::kIo, "cannot open feature sidecar " + sidecar_path(csv).string());
  json meta;
  try {
    meta = json::parse(side);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, sidecar_path(csv).string() + ": " + e.what());
  }
  if (meta.value("format", "") != "chestprog-features") {
    throw Error(ErrorCode::kFormat, sidecar_path(csv).string() + " is not a feature sidecar");
  }
  std::map<std::string, StudyMeta> by_id;
  for (const auto& s : meta.at("studies")) {
    StudyMeta m{s.at("id"), s.at("label"), s.at("censor_days"), s.at("match_group")};
    by_id[m.id] = m;
  }

  std::ifstream in(csv);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + csv.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kFormat, csv.string() + " is empty");
  auto split = [](const std::string& l) {
    std::vector<std::string> out;
    std::stringstream ss(l);
    for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
    return out;
  };
  auto header = split(line);
  if (header.empty() || header.front() != "study_id") {
    throw Error(ErrorCode::kFormat, csv.string() + ": first column must be study_id");
  }
  std::vector<std::string> names(header.begin() + 1, header.end());
  std::vector<StudyMeta> studies;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::kFormat, csv.string() + ": row for " + (cells.empty() ? "?" : cells[0]) +
                                          " has " + std::to_string(cells.size()) + " cells");
    }
    auto it = by_id.find(cells[0]);
    if (it == by_id.end()) throw Error(ErrorCode::kFormat, "study " + cells[0] + " missing from sidecar");
    studies.push_back(it->second);
    std::vector<double> row;
    for (std::size_t c = 1; c < cells.size(); ++c) row.push_back(parse_double(cells[c]));
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd values(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < names.size(); ++c) {
      values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  FeatureTable table(std::move(names), std::move(studies), std::move(values));
  table.catalog_version = meta.at("catalog_version");
  return table;
}

}  // namespace chestprog::radiomics
