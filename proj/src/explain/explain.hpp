#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "attention/attention.hpp"
#include "data/bag.hpp"
#include "model/model.hpp"

namespace ccan {

enum class Normalization { kRaw, kMinMax };

// Per-token relevance aligned with the bag's grid.
struct AttentionMap {
  std::vector<double> scores;     // one per original token index
  std::vector<bool> dropped;      // tokens absent from the forward pass (score 0)
  std::size_t rows_total = 1;
  std::size_t cols_total = 1;
  std::vector<GridCoord> coords;  // placement of each token
  Normalization normalization = Normalization::kRaw;
};

// Class-token attribution over the kept input tokens of one stage: the class
// row of the chained self-attention rollouts (0.5·A + 0.5·I, row-renormalized)
// after the last cross-attention, multiplied into that cross-attention matrix.
std::vector<double> rollout_stage(const std::vector<AttentionRecord>& records);

template <typename T>
std::vector<double> rollout_stage(const StageOutput<T>& stage) {
  return rollout_stage(stage.records);
}

// Averages per-stage scores (indexed like `kept_indices`) onto all bag tokens,
// then min-max normalizes unless kRaw is requested.
AttentionMap aggregate_stage_scores(const std::vector<std::vector<double>>& stage_scores,
                                    const std::vector<std::size_t>& kept_indices, const FeatureBag& bag,
                                    Normalization normalization = Normalization::kMinMax);

template <typename T>
AttentionMap aggregate_rollout(const ModelOutput<T>& output, const FeatureBag& bag,
                               Normalization normalization = Normalization::kMinMax) {
  std::vector<std::vector<double>> scores;
  for (const auto& s : output.stages) scores.push_back(rollout_stage(s));
  return aggregate_stage_scores(scores, output.kept_indices, bag, normalization);
}

// Maps scores to [0, 1]; a constant map becomes all zeros.
void minmax_normalize(AttentionMap& map);

struct TopPatches {
  std::vector<std::size_t> lowest;
  std::vector<std::size_t> highest;
};

// Ties are broken by ascending token index. Throws UsageError for k > N.
TopPatches top_k_patches(const AttentionMap& map, std::size_t k);

// Grid-resolution grayscale pixels, round(score·255); cells without a token are 0.
std::vector<std::uint8_t> heatmap_pixels(const AttentionMap& map);

// Writes <stem>.csv (row,col,score per token) and <stem>.pgm (binary P5).
void export_heatmap(const AttentionMap& map, const std::string& stem);

// CSV of bag_id,stage,e0..e{D_l-1} from eval-mode forwards, one row per bag and stage.
void export_class_embeddings(const CCANModel<float>& model, const std::vector<FeatureBag>& bags,
                             const std::string& path);

}  // namespace ccan
