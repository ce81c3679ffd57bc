#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "common/matrix.hpp"

namespace ccan {

// I equidistant frequencies from 1 to f_max.
struct FrequencyLadder {
  std::size_t count = 0;
  double f_max = 1.0;
  std::vector<double> frequencies;
};

struct GridCoord {
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t rows_total = 1;
  std::size_t cols_total = 1;

  bool operator==(const GridCoord&) const = default;
};

// Throws ConfigError for count == 0 or f_max < 1.
FrequencyLadder frequency_ladder(std::size_t count, double f_max);

// Maps the top-left grid cell to (-1, -1) and the bottom-right to (1, 1).
// Returns (x, y) = (column axis, row axis); a single-cell axis maps to 0.
std::pair<double, double> normalize_coord(const GridCoord& c);

// [sin(f_i π x), cos(f_i π x)]_i followed by the same for y: 4·count values,
// plus (x, y) when `append_raw_coords` is set.
std::vector<float> encode_position(const GridCoord& c, const FrequencyLadder& ladder,
                                   bool append_raw_coords = false);

std::size_t encoding_width(const FrequencyLadder& ladder, bool append_raw_coords = false);

// Appends the positional encoding of coords[i] to row i of `tokens`.
Matrix attach_encodings(const Matrix& tokens, std::span<const GridCoord> coords, const FrequencyLadder& ladder,
                        bool append_raw_coords = false);

}  // namespace ccan
