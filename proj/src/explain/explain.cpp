#include "explain/explain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "common/binary_io.hpp"
#include "common/error.hpp"
#include "common/format.hpp"

namespace ccan {

std::vector<double> rollout_stage(const std::vector<AttentionRecord>& records) {
  std::size_t last_cross = records.size();
  for (std::size_t i = records.size(); i-- > 0;) {
    if (records[i].kind == AttentionKind::kCross) {
      last_cross = i;
      break;
    }
  }
  if (last_cross == records.size()) throw UsageError("rollout needs a recorded cross-attention matrix");
  const Matrix& cross = records[last_cross].matrix;
  const std::size_t queries = cross.rows;

  // Class token is the last query row.
  std::vector<double> v(queries, 0.0);
  v[queries - 1] = 1.0;
  for (std::size_t i = records.size(); i-- > last_cross + 1;) {
    const Matrix& a = records[i].matrix;
    if (a.rows != queries || a.cols != queries) throw DimensionError("self-attention record does not match the query set");
    std::vector<double> next(queries, 0.0);
    for (std::size_t r = 0; r < queries; ++r) {
      if (v[r] == 0.0) continue;
      double row_total = 0.0;
      for (std::size_t c = 0; c < queries; ++c) row_total += 0.5 * a(r, c) + (r == c ? 0.5 : 0.0);
      for (std::size_t c = 0; c < queries; ++c) {
        next[c] += v[r] * (0.5 * a(r, c) + (r == c ? 0.5 : 0.0)) / row_total;
      }
    }
    v = std::move(next);
  }
  std::vector<double> scores(cross.cols, 0.0);
  for (std::size_t r = 0; r < queries; ++r) {
    if (v[r] == 0.0) continue;
    for (std::size_t c = 0; c < cross.cols; ++c) scores[c] += v[r] * cross(r, c);
  }
  return scores;
}

void minmax_normalize(AttentionMap& map) {
  if (map.scores.empty()) return;
  const auto [lo, hi] = std::minmax_element(map.scores.begin(), map.scores.end());
  const double min = *lo, span = *hi - *lo;
  for (double& s : map.scores) s = span > 0.0 ? (s - min) / span : 0.0;
  map.normalization = Normalization::kMinMax;
}

AttentionMap aggregate_stage_scores(const std::vector<std::vector<double>>& stage_scores,
                                    const std::vector<std::size_t>& kept_indices, const FeatureBag& bag,
                                    Normalization normalization) {
  AttentionMap map;
  map.rows_total = bag.rows_total;
  map.cols_total = bag.cols_total;
  map.coords = bag.coords;
  map.scores.assign(bag.size(), 0.0);
  map.dropped.assign(bag.size(), true);
  for (std::size_t idx : kept_indices) {
    if (idx >= bag.size()) throw DimensionError("kept token index out of range");
    map.dropped[idx] = false;
  }
  if (stage_scores.empty()) throw UsageError("no stage scores to aggregate");
  for (const auto& scores : stage_scores) {
    if (scores.size() != kept_indices.size()) throw DimensionError("stage scores do not match the kept tokens");
    for (std::size_t k = 0; k < scores.size(); ++k) map.scores[kept_indices[k]] += scores[k];
  }
  for (double& s : map.scores) s /= static_cast<double>(stage_scores.size());
  if (normalization == Normalization::kMinMax) minmax_normalize(map);
  return map;
}

TopPatches top_k_patches(const AttentionMap& map, std::size_t k) {
  const std::size_t n = map.scores.size();
  if (k > n) throw UsageError("top-k with k = " + std::to_string(k) + " exceeds " + std::to_string(n) + " patches");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  TopPatches top;
  top.lowest = order;
  std::stable_sort(top.lowest.begin(), top.lowest.end(),
                   [&](std::size_t a, std::size_t b) { return map.scores[a] < map.scores[b]; });
  top.highest = order;
  std::stable_sort(top.highest.begin(), top.highest.end(),
                   [&](std::size_t a, std::size_t b) { return map.scores[a] > map.scores[b]; });
  top.lowest.resize(k);
  top.highest.resize(k);
  return top;
}

std::vector<std::uint8_t> heatmap_pixels(const AttentionMap& map) {
  std::vector<std::uint8_t> pixels(map.rows_total * map.cols_total, 0);
  for (std::size_t i = 0; i < map.scores.size(); ++i) {
    const GridCoord& c = map.coords[i];
    const double v = std::clamp(map.scores[i], 0.0, 1.0) * 255.0;
    pixels[c.row * map.cols_total + c.col] = static_cast<std::uint8_t>(std::lround(v));
  }
  return pixels;
}

void export_heatmap(const AttentionMap& map, const std::string& stem) {
  if (map.coords.size() != map.scores.size()) throw UsageError("attention map has mismatched coordinates");
  std::ostringstream csv;
  csv << "row,col,score\n";
  for (std::size_t i = 0; i < map.scores.size(); ++i) {
    csv << map.coords[i].row << ',' << map.coords[i].col << ',' << format_double(map.scores[i]) << '\n';
  }
  write_text_file(stem + ".csv", csv.str());

  const auto pixels = heatmap_pixels(map);
  std::string pgm = "P5\n" + std::to_string(map.cols_total) + " " + std::to_string(map.rows_total) + "\n255\n";
  pgm.append(pixels.begin(), pixels.end());
  write_text_file(stem + ".pgm", pgm);
}

void export_class_embeddings(const CCANModel<float>& model, const std::vector<FeatureBag>& bags,
                             const std::string& path) {
  std::ostringstream csv;
  csv << "bag_id,stage";
  for (std::size_t d = 0; d < model.config.latent_dim; ++d) csv << ",e" << d;
  csv << '\n';
  NoGradGuard no_grad;
  for (const FeatureBag& bag : bags) {
    const auto out = forward(model, bag, nullptr, false);
    for (std::size_t j = 0; j < out.stages.size(); ++j) {
      csv << bag.bag_id << ',' << j;
      for (float v : out.stages[j].class_embedding.data()) csv << ',' << format_float(v);
      csv << '\n';
    }
  }
  write_text_file(path, csv.str());
}

}  // namespace ccan
