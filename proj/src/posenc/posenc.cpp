#include "posenc/posenc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "common/error.hpp"

namespace ccan {

FrequencyLadder frequency_ladder(std::size_t count, double f_max) {
  if (count == 0) throw ConfigError("frequency count must be at least 1");
  if (!(f_max >= 1.0)) throw ConfigError("maximal frequency must be >= 1, got " + std::to_string(f_max));
  FrequencyLadder ladder{count, f_max, {}};
  ladder.frequencies.reserve(count);
  if (count == 1) {
    ladder.frequencies.push_back(1.0);
    return ladder;
  }
  const double step = (f_max - 1.0) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) ladder.frequencies.push_back(1.0 + step * static_cast<double>(i));
  ladder.frequencies.back() = f_max;
  return ladder;
}

namespace {
double normalize_axis(std::size_t index, std::size_t total) {
  if (total <= 1) return 0.0;
  return 2.0 * static_cast<double>(index) / static_cast<double>(total - 1) - 1.0;
}
}  // namespace

std::pair<double, double> normalize_coord(const GridCoord& c) {
  return {normalize_axis(c.col, c.cols_total), normalize_axis(c.row, c.rows_total)};
}

std::size_t encoding_width(const FrequencyLadder& ladder, bool append_raw_coords) {
  return 4 * ladder.count + (append_raw_coords ? 2 : 0);
}

std::vector<float> encode_position(const GridCoord& c, const FrequencyLadder& ladder, bool append_raw_coords) {
  const auto [x, y] = normalize_coord(c);
  std::vector<float> out;
  out.reserve(encoding_width(ladder, append_raw_coords));
  for (double axis : {x, y}) {
    for (double f : ladder.frequencies) {
      const double angle = f * std::numbers::pi * axis;
      out.push_back(static_cast<float>(std::sin(angle)));
      out.push_back(static_cast<float>(std::cos(angle)));
    }
  }
  if (append_raw_coords) {
    out.push_back(static_cast<float>(x));
    out.push_back(static_cast<float>(y));
  }
  return out;
}

Matrix attach_encodings(const Matrix& tokens, std::span<const GridCoord> coords, const FrequencyLadder& ladder,
                        bool append_raw_coords) {
  if (coords.size() != tokens.rows) {
    throw DataError("attach_encodings: " + std::to_string(tokens.rows) + " tokens but " +
                    std::to_string(coords.size()) + " coordinates");
  }
  const std::size_t width = tokens.cols + encoding_width(ladder, append_raw_coords);
  Matrix out(tokens.rows, width);
  for (std::size_t i = 0; i < tokens.rows; ++i) {
    auto dst = out.row(i);
    const auto src = tokens.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
    const auto enc = encode_position(coords[i], ladder, append_raw_coords);
    std::copy(enc.begin(), enc.end(), dst.begin() + static_cast<std::ptrdiff_t>(tokens.cols));
  }
  return out;
}

}  // namespace ccan
