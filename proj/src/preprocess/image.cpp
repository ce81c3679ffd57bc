#include "preprocess/image.hpp"

#include <cctype>
#include <fstream>
#include <map>

#include "common/binary_io.hpp"
#include "common/error.hpp"

namespace ccan {

void RasterImage::validate() const {
  if (channels != 1 && channels != 3) throw DataError("image must have 1 or 3 channels");
  if (width == 0 || height == 0) throw DataError("image has zero extent");
  if (pixels.size() != width * height * channels) throw DataError("pixel buffer does not match the image extents");
  if (!(microns_per_pixel > 0.0)) throw DataError("microns_per_pixel must be positive");
}

namespace {

// Reads one header integer, skipping whitespace and comments.
std::size_t header_int(const std::vector<std::uint8_t>& b, std::size_t& pos) {
  while (pos < b.size()) {
    if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else if (std::isspace(b[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  if (pos >= b.size() || !std::isdigit(b[pos])) throw FormatError("malformed PNM header", pos);
  std::size_t v = 0;
  while (pos < b.size() && std::isdigit(b[pos])) {
    v = v * 10 + static_cast<std::size_t>(b[pos] - '0');
    if (v > (1u << 30)) throw FormatError("PNM header value too large", pos);
    ++pos;
  }
  return v;
}

}  // namespace

RasterImage decode_pnm(const std::vector<std::uint8_t>& b) {
  if (b.size() < 2 || b[0] != 'P' || (b[1] != '5' && b[1] != '6')) throw FormatError("expected a P5 or P6 image", 0);
  RasterImage img;
  img.channels = b[1] == '6' ? 3 : 1;
  std::size_t pos = 2;
  img.width = header_int(b, pos);
  img.height = header_int(b, pos);
  const std::size_t maxval = header_int(b, pos);
  if (maxval != 255) throw FormatError("only maxval 255 is supported", pos);
  if (pos >= b.size() || !std::isspace(b[pos])) throw FormatError("missing whitespace after PNM header", pos);
  ++pos;
  if (img.width == 0 || img.height == 0) throw FormatError("image has zero extent", pos);
  const std::size_t need = img.width * img.height * img.channels;
  if (b.size() - pos < need) throw FormatError("truncated pixel data", b.size());
  if (b.size() - pos > need) throw FormatError("trailing bytes after pixel data", pos + need);
  img.pixels.assign(b.begin() + static_cast<std::ptrdiff_t>(pos), b.end());
  return img;
}

RasterImage read_pnm(const std::string& path) { return decode_pnm(read_file_bytes(path)); }

std::vector<std::uint8_t> encode_pnm(const RasterImage& img) {
  img.validate();
  const std::string header = std::string(img.channels == 3 ? "P6" : "P5") + "\n" + std::to_string(img.width) + " " +
                             std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

void write_pnm(const RasterImage& img, const std::string& path) { write_file_bytes(path, encode_pnm(img)); }

ImageSidecar read_sidecar(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open sidecar " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto z = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, z - a + 1);
  };
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(path + ": expected key=value, got '" + line + "'");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  auto need = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError(path + ": missing key '" + key + "'");
    return it->second;
  };
  ImageSidecar s;
  try {
    s.microns_per_pixel = std::stod(need("microns_per_pixel"));
  } catch (const std::invalid_argument&) {
    throw ConfigError(path + ": microns_per_pixel is not a number");
  }
  try {
    s.label = static_cast<std::uint32_t>(std::stoul(need("label")));
  } catch (const std::invalid_argument&) {
    throw ConfigError(path + ": label is not an integer");
  }
  s.bag_id = need("bag_id");
  s.patient_id = need("patient_id");
  if (!(s.microns_per_pixel > 0.0)) throw ConfigError(path + ": microns_per_pixel must be positive");
  return s;
}

}  // namespace ccan
