#include "chestprog/volume.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace chestprog {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kDimensionMismatch: return "dimension mismatch";
    case ErrorCode::kMalformedHeader: return "malformed header";
    case ErrorCode::kTruncatedPayload: return "truncated payload";
    case ErrorCode::kPayloadMismatch: return "payload mismatch";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kManifest: return "manifest error";
    case ErrorCode::kPhantomTooSmall: return "phantom too small";
    case ErrorCode::kEmptyData: return "empty data";
    case ErrorCode::kSingleClass: return "single class";
    case ErrorCode::kNonFinite: return "non-finite value";
    case ErrorCode::kCatalogMismatch: return "catalog mismatch";
    case ErrorCode::kExtraction: return "extraction failure";
    case ErrorCode::kUnmatchedCohort: return "unmatched cohort";
    case ErrorCode::kFormat: return "format error";
  }
  return "error";
}

std::string to_string(const Dims& dims) {
  return std::to_string(dims.x) + "x" + std::to_string(dims.y) + "x" + std::to_string(dims.z);
}

Volume::Volume(Dims dims, Spacing spacing, std::vector<std::int16_t> data, HuRange clamp)
    : dims_(dims), spacing_(spacing), data_(std::move(data)) {
  if (dims.x <= 0 || dims.y <= 0 || dims.z <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "volume dims must be positive, got " + to_string(dims));
  }
  if (!(spacing.x > 0.0 && spacing.y > 0.0 && spacing.z > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "volume spacing must be positive");
  }
  if (data_.size() != dims.count()) {
    throw Error(ErrorCode::kPayloadMismatch, "volume " + to_string(dims) + " needs " +
                                                 std::to_string(dims.count()) + " samples, got " +
                                                 std::to_string(data_.size()));
  }
  if (clamp.lo > clamp.hi || clamp.lo < INT16_MIN || clamp.hi > INT16_MAX) {
    throw Error(ErrorCode::kInvalidArgument, "HU clamp range must be ordered and fit 16 bits");
  }
  for (auto& v : data_) {
    v = static_cast<std::int16_t>(std::clamp<int>(v, clamp.lo, clamp.hi));
  }
}

namespace {
constexpr std::array<std::string_view, kAnatomyCount> kAnatomyNames = {
    "muscle", "body_fat", "aorta", "spinal_column", "epicardial_fat", "heart", "lungs"};
}

std::string_view to_string(Anatomy anatomy) {
  return kAnatomyNames[static_cast<std::size_t>(anatomy)];
}

std::optional<Anatomy> parse_anatomy(std::string_view name) {
  for (std::size_t i = 0; i < kAnatomyCount; ++i) {
    if (kAnatomyNames[i] == name) return static_cast<Anatomy>(i);
  }
  return std::nullopt;
}

AnatomyMask::AnatomyMask(Anatomy anatomy, Dims dims, std::vector<std::uint8_t> bits)
    : anatomy_(anatomy), dims_(dims), bits_(std::move(bits)) {
  if (bits_.size() != dims.count()) {
    throw Error(ErrorCode::kPayloadMismatch, std::string(to_string(anatomy)) + " mask " +
                                                 to_string(dims) + " has " +
                                                 std::to_string(bits_.size()) + " bits");
  }
  for (auto b : bits_) {
    if (b > 1) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string(to_string(anatomy)) + " mask holds a value outside {0, 1}");
    }
    popcount_ += b;
  }
}

StudyRecord::StudyRecord(std::string id, Volume volume, std::vector<AnatomyMask> masks, int label,
                         std::int64_t censor_days, int match_group)
    : id_(std::move(id)),
      volume_(std::move(volume)),
      label_(label),
      censor_days_(censor_days),
      match_group_(match_group) {
  if (label != 0 && label != 1) {
    throw Error(ErrorCode::kInvalidArgument, "study " + id_ + ": label must be 0 or 1");
  }
  if (censor_days < 0) {
    throw Error(ErrorCode::kInvalidArgument, "study " + id_ + ": censor_days must be nonnegative");
  }
  std::array<bool, kAnatomyCount> seen{};
  if (masks.size() != kAnatomyCount) {
    throw Error(ErrorCode::kInvalidArgument,
                "study " + id_ + ": expected 7 anatomy masks, got " + std::to_string(masks.size()));
  }
  for (auto& m : masks) {
    const auto slot = static_cast<std::size_t>(m.anatomy());
    if (seen[slot]) {
      throw Error(ErrorCode::kInvalidArgument, "study " + id_ + ": duplicate mask for " +
                                                   std::string(to_string(m.anatomy())));
    }
    if (!(m.dims() == volume_.dims())) {
      throw Error(ErrorCode::kDimensionMismatch, "study " + id_ + ": " +
                                                     std::string(to_string(m.anatomy())) +
                                                     " mask " + to_string(m.dims()) +
                                                     " vs volume " + to_string(volume_.dims()));
    }
    seen[slot] = true;
    masks_[slot] = std::move(m);
  }
}

StudyMeta meta_of(const StudyRecord& study) {
  return {study.id(), study.label(), study.censor_days(), study.match_group()};
}

FeatureTable::FeatureTable(std::vector<std::string> column_names, std::vector<StudyMeta> studies,
                           Eigen::MatrixXd values)
    : column_names_(std::move(column_names)), studies_(std::move(studies)), values_(std::move(values)) {
  std::set<std::string> unique(column_names_.begin(), column_names_.end());
  if (unique.size() != column_names_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "feature table has duplicate column names");
  }
  if (static_cast<std::size_t>(values_.rows()) != studies_.size() ||
      static_cast<std::size_t>(values_.cols()) != column_names_.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "feature table shape does not match its labels");
  }
  if (!values_.allFinite()) {
    throw Error(ErrorCode::kNonFinite, "feature table holds a non-finite value");
  }
}

FeatureTable FeatureTable::select_rows(std::span<const std::size_t> rows) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), values_.cols());
  std::vector<StudyMeta> meta;
  meta.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = values_.row(static_cast<Eigen::Index>(rows[r]));
    meta.push_back(studies_.at(rows[r]));
  }
  FeatureTable t(column_names_, std::move(meta), std::move(out));
  t.catalog_version = catalog_version;
  return t;
}

void require_same_dims(const Volume& volume, const AnatomyMask& mask) {
  if (!(volume.dims() == mask.dims())) {
    throw Error(ErrorCode::kDimensionMismatch, "volume " + to_string(volume.dims()) + " vs " +
                                                   std::string(to_string(mask.anatomy())) +
                                                   " mask " + to_string(mask.dims()));
  }
}

std::vector<MaskedVoxel> masked_voxels(const Volume& volume, const AnatomyMask& mask) {
  require_same_dims(volume, mask);
  const auto& d = volume.dims();
  std::vector<MaskedVoxel> out;
  out.reserve(mask.popcount());
  std::size_t idx = 0;
  for (int k = 0; k < d.z; ++k) {
    for (int j = 0; j < d.y; ++j) {
      for (int i = 0; i < d.x; ++i, ++idx) {
        if (mask.test(idx)) out.push_back({{i, j, k}, static_cast<double>(volume[idx])});
      }
    }
  }
  return out;
}

}  // namespace chestprog
