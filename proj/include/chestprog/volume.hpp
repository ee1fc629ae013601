#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "chestprog/error.hpp"

namespace chestprog {

/// Lattice extent in voxels. Storage order is x-fastest, then y, then z.
struct Dims {
  int x = 0;
  int y = 0;
  int z = 0;

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(x) * static_cast<std::size_t>(y) * static_cast<std::size_t>(z);
  }
  std::size_t index(int i, int j, int k) const noexcept {
    return (static_cast<std::size_t>(k) * static_cast<std::size_t>(y) + static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(x) +
           static_cast<std::size_t>(i);
  }
  bool contains(int i, int j, int k) const noexcept {
    return i >= 0 && j >= 0 && k >= 0 && i < x && j < y && k < z;
  }
  bool operator==(const Dims&) const = default;
};

std::string to_string(const Dims& dims);

/// Millimetres per voxel along each axis.
struct Spacing {
  double x = 1.0;
  double y = 1.0;
  double z = 1.0;

  double voxel_volume_mm3() const noexcept { return x * y * z; }
  bool operator==(const Spacing&) const = default;
};

/// HU clamp applied once when a volume is ingested.
struct HuRange {
  int lo = -1024;
  int hi = 3071;
};

struct Coord {
  int x = 0;
  int y = 0;
  int z = 0;
  bool operator==(const Coord&) const = default;
};

class Volume {
 public:
  Volume() = default;
  /// Clamps every sample into `clamp`; throws on dims/payload mismatch or bad spacing.
  Volume(Dims dims, Spacing spacing, std::vector<std::int16_t> data, HuRange clamp = {});

  const Dims& dims() const noexcept { return dims_; }
  const Spacing& spacing() const noexcept { return spacing_; }
  std::span<const std::int16_t> data() const noexcept { return data_; }
  std::int16_t at(int i, int j, int k) const noexcept { return data_[dims_.index(i, j, k)]; }
  std::int16_t operator[](std::size_t idx) const noexcept { return data_[idx]; }

  bool operator==(const Volume&) const = default;

 private:
  Dims dims_;
  Spacing spacing_;
  std::vector<std::int16_t> data_;
};

enum class Anatomy : std::uint8_t {
  kMuscle = 0,
  kBodyFat,
  kAorta,
  kSpinalColumn,
  kEpicardialFat,
  kHeart,
  kLungs,
};

inline constexpr std::size_t kAnatomyCount = 7;
inline constexpr std::array<Anatomy, kAnatomyCount> kAllAnatomies = {
    Anatomy::kMuscle, Anatomy::kBodyFat,       Anatomy::kAorta, Anatomy::kSpinalColumn,
    Anatomy::kEpicardialFat, Anatomy::kHeart, Anatomy::kLungs};

std::string_view to_string(Anatomy anatomy);
std::optional<Anatomy> parse_anatomy(std::string_view name);

class AnatomyMask {
 public:
  AnatomyMask() = default;
  /// Throws when the bit count does not match dims or any bit is outside {0, 1}.
  AnatomyMask(Anatomy anatomy, Dims dims, std::vector<std::uint8_t> bits);

  Anatomy anatomy() const noexcept { return anatomy_; }
  const Dims& dims() const noexcept { return dims_; }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  bool test(std::size_t idx) const noexcept { return bits_[idx] != 0; }
  bool test(int i, int j, int k) const noexcept { return bits_[dims_.index(i, j, k)] != 0; }
  std::size_t popcount() const noexcept { return popcount_; }
  bool empty() const noexcept { return popcount_ == 0; }

  bool operator==(const AnatomyMask& o) const {
    return anatomy_ == o.anatomy_ && dims_ == o.dims_ && bits_ == o.bits_;
  }

 private:
  Anatomy anatomy_ = Anatomy::kMuscle;
  Dims dims_;
  std::vector<std::uint8_t> bits_;
  std::size_t popcount_ = 0;
};

/// One subject: volume, the seven anatomy masks and the binary outcome.
class StudyRecord {
 public:
  StudyRecord() = default;
  /// `masks` may come in any order but must hold each anatomy exactly once.
  StudyRecord(std::string id, Volume volume, std::vector<AnatomyMask> masks, int label,
              std::int64_t censor_days, int match_group);

  const std::string& id() const noexcept { return id_; }
  const Volume& volume() const noexcept { return volume_; }
  const AnatomyMask& mask(Anatomy anatomy) const noexcept {
    return masks_[static_cast<std::size_t>(anatomy)];
  }
  const std::array<AnatomyMask, kAnatomyCount>& masks() const noexcept { return masks_; }
  int label() const noexcept { return label_; }
  std::int64_t censor_days() const noexcept { return censor_days_; }
  int match_group() const noexcept { return match_group_; }

  bool operator==(const StudyRecord&) const = default;

 private:
  std::string id_;
  Volume volume_;
  std::array<AnatomyMask, kAnatomyCount> masks_;
  int label_ = 0;
  std::int64_t censor_days_ = 0;
  int match_group_ = 0;
};

/// Outcome metadata carried alongside feature rows.
struct StudyMeta {
  std::string id;
  int label = 0;
  std::int64_t censor_days = 0;
  int match_group = 0;
  bool operator==(const StudyMeta&) const = default;
};

StudyMeta meta_of(const StudyRecord& study);

/// Named feature matrix; rows are studies, columns catalog entries. All values finite.
class FeatureTable {
 public:
  FeatureTable() = default;
  FeatureTable(std::vector<std::string> column_names, std::vector<StudyMeta> studies,
               Eigen::MatrixXd values);

  const std::vector<std::string>& column_names() const noexcept { return column_names_; }
  const std::vector<StudyMeta>& studies() const noexcept { return studies_; }
  const Eigen::MatrixXd& values() const noexcept { return values_; }
  std::size_t rows() const noexcept { return studies_.size(); }
  std::size_t cols() const noexcept { return column_names_.size(); }

  /// Rows at the given positions, in that order.
  FeatureTable select_rows(std::span<const std::size_t> rows) const;

  std::string catalog_version;

 private:
  std::vector<std::string> column_names_;
  std::vector<StudyMeta> studies_;
  Eigen::MatrixXd values_;
};

struct MaskedVoxel {
  Coord coord;
  double hu = 0.0;
};

/// In-mask voxels in x-fastest scan order.
std::vector<MaskedVoxel> masked_voxels(const Volume& volume, const AnatomyMask& mask);

void require_same_dims(const Volume& volume, const AnatomyMask& mask);

}  // namespace chestprog
