#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "attention/attention.hpp"
#include "common/rng.hpp"
#include "data/bag.hpp"
#include "model/config.hpp"
#include "tensor/ops.hpp"

namespace ccan {

template <typename T>
struct StageParams {
  Tensor<T> latents;      // M_j × D_l
  Tensor<T> class_token;  // 1 × D_l
  std::vector<BlockParams<T>> cross;  // Z
  std::vector<BlockParams<T>> self;   // Z·S, grouped by repeat
  BlockParams<T> final_cross;         // over the original input tokens
  BlockParams<T> final_self;
};

// Shared prediction head: layer-norm, D_l → D_l, GELU, D_l → outputs.
template <typename T>
struct HeadParams {
  LayerNormParams<T> norm;
  Linear<T> hidden;
  Linear<T> out;

  Tensor<T> operator()(const Tensor<T>& x) const { return out(gelu(hidden(norm(x)))); }
};

template <typename T>
struct CCANModel {
  CCANConfig config;
  Linear<T> input_projection;  // encoded token width → D_l
  std::vector<StageParams<T>> stages;
  HeadParams<T> head;

  // Every learnable tensor in a fixed order; handles alias the model's storage.
  NamedTensors<T> named_parameters() const;

  // Copy with parameters converted to another scalar type.
  template <typename U>
  CCANModel<U> cast() const;
};

template <typename T>
struct StageOutput {
  Tensor<T> latents_out;      // M_j × D_l, class token removed
  Tensor<T> class_embedding;  // 1 × D_l
  Tensor<T> probs;            // 1 × output_dim, sigmoid outputs
  std::vector<AttentionRecord> records;
};

template <typename T>
struct ModelOutput {
  std::vector<StageOutput<T>> stages;
  std::vector<double> averaged_probs;  // mean of the stage probabilities
  std::vector<std::size_t> kept_indices;
};

// Deterministic for a given seed; throws ConfigError for invalid configs.
template <typename T>
CCANModel<T> init_model(const CCANConfig& config, std::uint64_t seed);

// Rows kept by input-token dropout, ascending. Train mode keeps
// max(1, round(n·(1 − p_do))) uniformly sampled rows; eval mode keeps all.
std::vector<std::size_t> token_dropout_indices(std::size_t n, double p_do, Rng* rng, bool train_mode);

template <typename T>
struct DropoutResult {
  Tensor<T> subset;
  std::vector<std::size_t> kept_indices;
};

template <typename T>
DropoutResult<T> token_dropout(const Tensor<T>& tokens, double p_do, Rng* rng, bool train_mode);

// Mean of each run of `compression` consecutive rows.
template <typename T>
Tensor<T> pooled_skip(const Tensor<T>& prev, std::size_t compression);

// Positional encodings appended to the bag's tokens, restricted to `rows`.
template <typename T>
Tensor<T> encode_bag_tokens(const FeatureBag& bag, const CCANConfig& config, std::span<const std::size_t> rows);

// One stage. `stage_context` is the projected inputs for stage 0 and the
// previous stage's latents_out afterwards; `inputs` is always the projected
// (kept) original tokens.
template <typename T>
StageOutput<T> stage_forward(const CCANModel<T>& model, std::size_t stage, const Tensor<T>& stage_context,
                             const Tensor<T>& inputs);

template <typename T>
ModelOutput<T> forward(const CCANModel<T>& model, const FeatureBag& bag, Rng* rng, bool train_mode);

// Sum over stages of the mean binary cross-entropy of each stage's probabilities.
template <typename T>
Tensor<T> total_stage_loss(const ModelOutput<T>& output, std::uint32_t label, std::size_t num_classes);

}  // namespace ccan

#include "model/model_cast.hpp"
