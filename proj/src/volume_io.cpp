#include "chestprog/volume_io.hpp"

#include <bit>
#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

namespace chestprog::synthio {
namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct Header {
  Dims dims;
  std::optional<Spacing> spacing;
  std::string encoding;
  std::optional<Anatomy> anatomy;
  std::size_t payload_offset = 0;
};

[[noreturn]] void malformed(const std::filesystem::path& path, const std::string& what) {
  throw Error(ErrorCode::kMalformedHeader, path.string() + ": " + what);
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_all(const std::filesystem::path& path, const std::string& header,
               const std::vector<char>& payload) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

template <typename T>
bool parse_number(std::string_view token, T& out) {
  auto res = std::from_chars(token.data(), token.data() + token.size(), out);
  return res.ec == std::errc() && res.ptr == token.data() + token.size();
}

Header parse_header(const std::string& bytes, const std::filesystem::path& path) {
  Header h;
  std::size_t pos = 0;
  auto next_line = [&]() -> std::optional<std::string> {
    auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos || nl - pos > 256) return std::nullopt;
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  auto first = next_line();
  if (!first || *first != kVolumeMagic) malformed(path, "missing magic line");
  bool have_dims = false;
  while (true) {
    auto line = next_line();
    if (!line) malformed(path, "header not terminated by 'end'");
    if (*line == "end") break;
    std::istringstream ls(*line);
    std::string key;
    ls >> key;
    std::vector<std::string> toks;
    for (std::string t; ls >> t;) toks.push_back(t);
    if (key == "dims") {
      if (toks.size() != 3 || !parse_number(toks[0], h.dims.x) || !parse_number(toks[1], h.dims.y) ||
          !parse_number(toks[2], h.dims.z) || h.dims.x <= 0 || h.dims.y <= 0 || h.dims.z <= 0) {
        malformed(path, "bad dims line");
      }
      have_dims = true;
    } else if (key == "spacing") {
      Spacing s;
      if (toks.size() != 3 || !parse_number(toks[0], s.x) || !parse_number(toks[1], s.y) ||
          !parse_number(toks[2], s.z)) {
        malformed(path, "bad spacing line");
      }
      h.spacing = s;
    } else if (key == "encoding") {
      if (toks.size() != 1 || (toks[0] != "int16le" && toks[0] != "uint8")) {
        malformed(path, "unknown encoding");
      }
      h.encoding = toks[0];
    } else if (key == "anatomy") {
      if (toks.size() != 1 || !(h.anatomy = parse_anatomy(toks[0]))) malformed(path, "unknown anatomy");
    } else {
      malformed(path, "unknown header key '" + key + "'");
    }
  }
  if (!have_dims || h.encoding.empty()) malformed(path, "header lacks dims or encoding");
  h.payload_offset = pos;
  return h;
}

void check_payload_size(const std::string& bytes, const Header& h, std::size_t sample_bytes,
                        const std::filesystem::path& path) {
  const std::size_t want = h.dims.count() * sample_bytes;
  const std::size_t have = bytes.size() - h.payload_offset;
  if (have < want) {
    throw Error(ErrorCode::kTruncatedPayload, path.string() + ": expected " + std::to_string(want) +
                                                  " payload bytes, found " + std::to_string(have));
  }
  if (have > want) {
    throw Error(ErrorCode::kPayloadMismatch, path.string() + ": dims " + to_string(h.dims) +
                                                 " imply " + std::to_string(want) +
                                                 " payload bytes, found " + std::to_string(have));
  }
}

}  // namespace

void write_volume(const Volume& volume, const std::filesystem::path& path) {
  const auto& d = volume.dims();
  const auto& s = volume.spacing();
  std::string header = std::string(kVolumeMagic) + "\n";
  header += "dims " + std::to_string(d.x) + " " + std::to_string(d.y) + " " + std::to_string(d.z) + "\n";
  header += "spacing " + format_double(s.x) + " " + format_double(s.y) + " " + format_double(s.z) + "\n";
  header += "encoding int16le\nend\n";
  std::vector<char> payload(volume.data().size() * 2);
  for (std::size_t i = 0; i < volume.data().size(); ++i) {
    const auto u = static_cast<std::uint16_t>(volume.data()[i]);
    payload[2 * i] = static_cast<char>(u & 0xFF);
    payload[2 * i + 1] = static_cast<char>(u >> 8);
  }
  write_all(path, header, payload);
}

Volume read_volume(const std::filesystem::path& path, HuRange clamp) {
  const std::string bytes = read_all(path);
  const Header h = parse_header(bytes, path);
  if (h.encoding != "int16le") malformed(path, "volume must use int16le encoding");
  if (!h.spacing) malformed(path, "volume header lacks spacing");
  check_payload_size(bytes, h, 2, path);
  std::vector<std::int16_t> data(h.dims.count());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + h.payload_offset);
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = static_cast<std::int16_t>(static_cast<std::uint16_t>(p[2 * i] | (p[2 * i + 1] << 8)));
  }
  try {
    return Volume(h.dims, *h.spacing, std::move(data), clamp);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_mask(const AnatomyMask& mask, const std::filesystem::path& path) {
  const auto& d = mask.dims();
  std::string header = std::string(kVolumeMagic) + "\n";
  header += "dims " + std::to_string(d.x) + " " + std::to_string(d.y) + " " + std::to_string(d.z) + "\n";
  header += "encoding uint8\nanatomy " + std::string(to_string(mask.anatomy())) + "\nend\n";
  std::vector<char> payload(mask.bits().begin(), mask.bits().end());
  write_all(path, header, payload);
}

AnatomyMask read_mask(const std::filesystem::path& path) {
  const std::string bytes = read_all(path);
  const Header h = parse_header(bytes, path);
  if (h.encoding != "uint8") malformed(path, "mask must use uint8 encoding");
  if (!h.anatomy) malformed(path, "mask header lacks anatomy");
  check_payload_size(bytes, h, 1, path);
  std::vector<std::uint8_t> bits(bytes.begin() + static_cast<std::ptrdiff_t>(h.payload_offset), bytes.end());
  try {
    return AnatomyMask(*h.anatomy, h.dims, std::move(bits));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace chestprog::synthio
