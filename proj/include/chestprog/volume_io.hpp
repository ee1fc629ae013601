#pragma once

#include <filesystem>

#include "chestprog/volume.hpp"

namespace chestprog::synthio {

// Volume and mask files are a short text header followed by the raw payload:
//
//   CHESTPROG-VOLUME 1\n
//   dims <x> <y> <z>\n
//   spacing <sx> <sy> <sz>\n        (volumes only; shortest round-trip decimal)
//   encoding int16le | uint8\n
//   anatomy <name>\n                (masks only)
//   end\n
//   <payload: x*y*z samples, x-fastest, little-endian>
//
// Volumes are signed 16-bit HU; masks are unsigned 8-bit {0,1}.

inline constexpr std::string_view kVolumeMagic = "CHESTPROG-VOLUME 1";

void write_volume(const Volume& volume, const std::filesystem::path& path);
Volume read_volume(const std::filesystem::path& path, HuRange clamp = {});

void write_mask(const AnatomyMask& mask, const std::filesystem::path& path);
AnatomyMask read_mask(const std::filesystem::path& path);

}  // namespace chestprog::synthio
