#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ccan {

struct RasterImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 3;  // 1 or 3
  std::vector<std::uint8_t> pixels;  // row-major, interleaved channels
  double microns_per_pixel = 1.0;

  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const { return pixels[(y * width + x) * channels + c]; }
  // Throws DataError when the buffer length or channel count is inconsistent.
  void validate() const;
};

// Binary PPM (P6) or PGM (P5), maxval 255. Throws FormatError on malformed input.
RasterImage decode_pnm(const std::vector<std::uint8_t>& bytes);
RasterImage read_pnm(const std::string& path);
std::vector<std::uint8_t> encode_pnm(const RasterImage& img);
void write_pnm(const RasterImage& img, const std::string& path);

// key=value metadata next to an image.
struct ImageSidecar {
  double microns_per_pixel = 0.0;
  std::uint32_t label = 0;
  std::string bag_id;
  std::string patient_id;
};

// Requires microns_per_pixel, label, bag_id and patient_id; '#' starts a comment.
ImageSidecar read_sidecar(const std::string& path);

}  // namespace ccan
