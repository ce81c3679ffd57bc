#pragma once

#include "attention/attention.hpp"
#include "data/bag.hpp"
#include "model/config.hpp"

namespace ccan {

// Comparison aggregators: mean/max pooling of the raw feature tokens followed by
// a linear head, or one full self-attention block over every projected token.
template <typename T>
struct BaselineModel {
  ModelKind kind = ModelKind::kMeanPool;
  CCANConfig config;
  Linear<T> projection;  // full self-attention only: encoded width → D_l
  BlockParams<T> block;  // full self-attention only
  Linear<T> head;        // pooled width → output_dim

  NamedTensors<T> named_parameters() const;
};

template <typename T>
BaselineModel<T> init_baseline(ModelKind kind, const CCANConfig& config, std::uint64_t seed);

// 1 × output_dim sigmoid probabilities. `record`, when given, receives the
// N × N attention matrix of the full self-attention variant.
template <typename T>
Tensor<T> baseline_forward(const BaselineModel<T>& model, const FeatureBag& bag, AttentionRecord* record = nullptr);

// Closed-form multiply-accumulate count of baseline_forward for n tokens.
std::uint64_t baseline_macs(ModelKind kind, const CCANConfig& config, std::size_t n);
// Only the N² score and weighted-sum products of the full self-attention baseline.
std::uint64_t baseline_attention_macs(const CCANConfig& config, std::size_t n);

}  // namespace ccan
