#pragma once

#include <cstddef>
#include <string>

#include "common/matrix.hpp"
#include "common/rng.hpp"
#include "tensor/ops.hpp"
#include "tensor/tensor.hpp"

namespace ccan {

enum class AttentionKind { kCross, kSelf };

// kPerPaper divides logits by sqrt(number of query rows); kPerDim by sqrt(head width).
enum class ScaleMode { kPerPaper, kPerDim };

// Row-stochastic attention weights captured during a forward pass.
struct AttentionRecord {
  Matrix matrix;
  AttentionKind kind = AttentionKind::kCross;
  std::size_t stage_index = 0;
  std::size_t layer_index = 0;
};

template <typename T>
struct Linear {
  Tensor<T> weight;  // in × out
  Tensor<T> bias;    // 1 × out

  Tensor<T> operator()(const Tensor<T>& x) const { return add_bias(matmul(x, weight), bias); }
  std::size_t in_features() const { return weight.rows(); }
  std::size_t out_features() const { return weight.cols(); }
};

template <typename T>
struct LayerNormParams {
  Tensor<T> gamma;
  Tensor<T> beta;

  Tensor<T> operator()(const Tensor<T>& x) const { return layer_norm(x, gamma, beta); }
};

// Weights of one pre-norm attention block followed by a residual GELU MLP.
// Cross blocks normalize the context with their own layer-norm.
template <typename T>
struct BlockParams {
  AttentionKind kind = AttentionKind::kSelf;
  LayerNormParams<T> norm_query;
  LayerNormParams<T> norm_context;  // cross blocks only
  LayerNormParams<T> norm_mlp;
  Linear<T> query, key, value, output;
  Linear<T> mlp_in, mlp_out;

  std::size_t width() const { return query.out_features(); }
  void collect(const std::string& prefix, NamedTensors<T>& out) const;
};

template <typename T>
Linear<T> init_linear(std::size_t in, std::size_t out, Rng& rng, double stddev = 0.02);
template <typename T>
LayerNormParams<T> init_layer_norm(std::size_t width);

// Projections ~ N(0, 0.02²), biases zero, layer-norms identity. MLP expands 4×.
template <typename T>
BlockParams<T> init_block(AttentionKind kind, std::size_t width, std::size_t context_width, Rng& rng);

struct AttentionOptions {
  ScaleMode scale_mode = ScaleMode::kPerPaper;
  std::size_t heads = 1;
  std::size_t stage_index = 0;
  std::size_t layer_index = 0;
};

template <typename T>
struct AttentionOutput {
  Tensor<T> out;
  AttentionRecord record;
};

// softmax(Q Kᵀ / scale) V. The record holds the softmax matrix.
template <typename T>
AttentionOutput<T> scaled_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, double scale);

// Splits Q/K/V into `heads` column groups; the record is the head-averaged matrix.
template <typename T>
AttentionOutput<T> multi_head_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                                        const AttentionOptions& options);

double attention_scale(std::size_t query_rows, std::size_t width, const AttentionOptions& options);

template <typename T>
AttentionOutput<T> cross_attention_block(const Tensor<T>& latents, const Tensor<T>& context,
                                         const BlockParams<T>& params, const AttentionOptions& options);

template <typename T>
AttentionOutput<T> self_attention_block(const Tensor<T>& tokens, const BlockParams<T>& params,
                                        const AttentionOptions& options);

// Closed-form multiply-accumulate counts matching the block implementations.
std::uint64_t cross_block_macs(std::size_t queries, std::size_t context_rows, std::size_t width,
                               std::size_t context_width);
std::uint64_t self_block_macs(std::size_t tokens, std::size_t width);

}  // namespace ccan
