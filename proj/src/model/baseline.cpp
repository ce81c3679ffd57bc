#include "model/baseline.hpp"

#include <numeric>

#include "common/error.hpp"
#include "model/model.hpp"

namespace ccan {

template <typename T>
NamedTensors<T> BaselineModel<T>::named_parameters() const {
  NamedTensors<T> out;
  if (kind == ModelKind::kFullSelfAttention) {
    out.emplace_back("projection.weight", projection.weight);
    out.emplace_back("projection.bias", projection.bias);
    block.collect("block.", out);
  }
  out.emplace_back("head.weight", head.weight);
  out.emplace_back("head.bias", head.bias);
  return out;
}

template <typename T>
BaselineModel<T> init_baseline(ModelKind kind, const CCANConfig& config, std::uint64_t seed) {
  if (kind == ModelKind::kCCAN) throw UsageError("init_baseline called for the CCAN model");
  config.validate();
  Rng rng(seed);
  BaselineModel<T> m;
  m.kind = kind;
  m.config = config;
  if (kind == ModelKind::kFullSelfAttention) {
    m.projection = init_linear<T>(config.input_width(), config.latent_dim, rng);
    m.block = init_block<T>(AttentionKind::kSelf, config.latent_dim, config.latent_dim, rng);
    m.head = init_linear<T>(config.latent_dim, config.output_dim(), rng);
  } else {
    m.head = init_linear<T>(config.feature_dim, config.output_dim(), rng);
  }
  return m;
}

template <typename T>
Tensor<T> baseline_forward(const BaselineModel<T>& model, const FeatureBag& bag, AttentionRecord* record) {
  if (bag.size() == 0) throw DataError("cannot run a baseline on an empty bag");
  if (bag.dim() != model.config.feature_dim) {
    throw DimensionError("bag token width " + std::to_string(bag.dim()) + " does not match model D_f " +
                         std::to_string(model.config.feature_dim));
  }
  if (model.kind == ModelKind::kFullSelfAttention) {
    std::vector<std::size_t> rows(bag.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    const Tensor<T> x = model.projection(encode_bag_tokens<T>(bag, model.config, rows));
    AttentionOptions options{model.config.scale_mode, model.config.heads, 0, 0};
    auto att = self_attention_block(x, model.block, options);
    if (record) *record = std::move(att.record);
    return sigmoid(model.head(mean_rows(att.out)));
  }
  const Tensor<T> tokens({bag.size(), bag.dim()}, std::vector<T>(bag.tokens.values.begin(), bag.tokens.values.end()));
  const Tensor<T> pooled = model.kind == ModelKind::kMeanPool ? mean_rows(tokens) : max_rows(tokens);
  return sigmoid(model.head(pooled));
}

std::uint64_t baseline_macs(ModelKind kind, const CCANConfig& config, std::size_t n) {
  const std::uint64_t out = config.output_dim();
  if (kind == ModelKind::kFullSelfAttention) {
    const std::uint64_t d = config.latent_dim;
    return static_cast<std::uint64_t>(n) * config.input_width() * d + self_block_macs(n, config.latent_dim) + d * out;
  }
  return static_cast<std::uint64_t>(config.feature_dim) * out;
}

std::uint64_t baseline_attention_macs(const CCANConfig& config, std::size_t n) {
  return 2ULL * n * n * config.latent_dim;
}

template struct BaselineModel<float>;
template struct BaselineModel<double>;
template BaselineModel<float> init_baseline(ModelKind, const CCANConfig&, std::uint64_t);
template BaselineModel<double> init_baseline(ModelKind, const CCANConfig&, std::uint64_t);
template Tensor<float> baseline_forward(const BaselineModel<float>&, const FeatureBag&, AttentionRecord*);
template Tensor<double> baseline_forward(const BaselineModel<double>&, const FeatureBag&, AttentionRecord*);

}  // namespace ccan
