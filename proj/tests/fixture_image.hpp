#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "preprocess/image.hpp"

namespace ccan::testing {

// 768×512 RGB at 1 µm/px: a 3×2 grid of 256 px patches. Patch (0,2) is white,
// patch (1,0) is flat gray, the rest carry integer-hash texture.
inline RasterImage fixture_image() {
  RasterImage img;
  img.width = 768;
  img.height = 512;
  img.channels = 3;
  img.microns_per_pixel = 1.0;
  img.pixels.resize(img.width * img.height * 3);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const std::size_t px = x / 256, py = y / 256;
      for (std::size_t c = 0; c < 3; ++c) {
        std::uint8_t v;
        if (py == 0 && px == 2) {
          v = 255;
        } else if (py == 1 && px == 0) {
          v = 150;
        } else {
          std::uint32_t h = static_cast<std::uint32_t>(x * 73856093u ^ y * 19349663u ^ (c + 1) * 83492791u);
          h ^= h >> 13;
          h *= 0x5bd1e995u;
          h ^= h >> 15;
          const std::uint32_t blob = ((x / 16 + y / 16) % 2) * 60;
          v = static_cast<std::uint8_t>(40 + blob + h % 100);
        }
        img.pixels[(y * img.width + x) * 3 + c] = v;
      }
    }
  }
  return img;
}

// 64-bit FNV-1a, for pinning byte outputs.
inline std::uint64_t fnv1a(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace ccan::testing
