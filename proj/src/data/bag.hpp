#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "common/matrix.hpp"
#include "posenc/posenc.hpp"

namespace ccan {

// One slide: N feature tokens with their grid placement and the slide label.
struct FeatureBag {
  std::string bag_id;
  std::string patient_id;
  std::uint32_t label = 0;
  std::size_t rows_total = 1;
  std::size_t cols_total = 1;
  Matrix tokens;                  // N × D_f
  std::vector<GridCoord> coords;  // one per token

  std::size_t size() const { return tokens.rows; }
  std::size_t dim() const { return tokens.cols; }

  // Throws DataError unless N ≥ 1, coords match the grid and are unique.
  void validate() const;

  bool operator==(const FeatureBag&) const = default;
};

// CCFB container, little-endian:
//   "CCFB" u16 version=1 u32 N u32 D_f u32 rows_total u32 cols_total u8 label
//   u8 len + bag_id bytes, u8 len + patient_id bytes
//   N × (u32 row, u32 col), then N·D_f float32 row-major.
inline constexpr std::uint16_t kBagFormatVersion = 1;

std::vector<std::uint8_t> encode_bag(const FeatureBag& bag);
// Throws FormatError (with byte offset) on bad magic, version or truncation.
FeatureBag decode_bag(const std::vector<std::uint8_t>& bytes);

void write_bag(const FeatureBag& bag, const std::string& path);
FeatureBag read_bag(const std::string& path);

struct ManifestEntry {
  std::string bag_id;
  std::string patient_id;
  std::uint32_t label = 0;
  std::string path;

  bool operator==(const ManifestEntry&) const = default;
};

// CSV with header bag_id,patient_id,label,path. Relative paths are stored as given.
void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path);
std::vector<ManifestEntry> read_manifest(const std::string& path);

// Loads every bag listed in a manifest; relative bag paths resolve against the manifest's directory.
std::vector<FeatureBag> load_manifest_bags(const std::string& manifest_path);

}  // namespace ccan
