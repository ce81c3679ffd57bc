#include "model/model.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"

namespace ccan {

template <typename T>
NamedTensors<T> CCANModel<T>::named_parameters() const {
  NamedTensors<T> out;
  out.emplace_back("input_projection.weight", input_projection.weight);
  out.emplace_back("input_projection.bias", input_projection.bias);
  for (std::size_t j = 0; j < stages.size(); ++j) {
    const auto& s = stages[j];
    const std::string p = "stage" + std::to_string(j) + ".";
    out.emplace_back(p + "latents", s.latents);
    out.emplace_back(p + "class_token", s.class_token);
    for (std::size_t z = 0; z < s.cross.size(); ++z) s.cross[z].collect(p + "cross" + std::to_string(z) + ".", out);
    for (std::size_t k = 0; k < s.self.size(); ++k) s.self[k].collect(p + "self" + std::to_string(k) + ".", out);
    s.final_cross.collect(p + "final_cross.", out);
    s.final_self.collect(p + "final_self.", out);
  }
  out.emplace_back("head.norm.gamma", head.norm.gamma);
  out.emplace_back("head.norm.beta", head.norm.beta);
  out.emplace_back("head.hidden.weight", head.hidden.weight);
  out.emplace_back("head.hidden.bias", head.hidden.bias);
  out.emplace_back("head.out.weight", head.out.weight);
  out.emplace_back("head.out.bias", head.out.bias);
  return out;
}

namespace {

template <typename T>
Tensor<T> random_tokens(std::size_t rows, std::size_t cols, Rng& rng) {
  std::vector<T> v(rows * cols);
  for (T& x : v) x = static_cast<T>(rng.normal(0.0, 0.02));
  return Tensor<T>({rows, cols}, std::move(v), true);
}

}  // namespace

template <typename T>
CCANModel<T> init_model(const CCANConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const std::size_t d = config.latent_dim;
  CCANModel<T> model;
  model.config = config;
  model.input_projection = init_linear<T>(config.input_width(), d, rng);
  for (std::size_t m : config.stage_latent_counts()) {
    StageParams<T> s;
    s.latents = random_tokens<T>(m, d, rng);
    s.class_token = random_tokens<T>(1, d, rng);
    for (std::size_t z = 0; z < config.repeats; ++z) {
      s.cross.push_back(init_block<T>(AttentionKind::kCross, d, d, rng));
      for (std::size_t l = 0; l < config.self_layers; ++l) s.self.push_back(init_block<T>(AttentionKind::kSelf, d, d, rng));
    }
    s.final_cross = init_block<T>(AttentionKind::kCross, d, d, rng);
    s.final_self = init_block<T>(AttentionKind::kSelf, d, d, rng);
    model.stages.push_back(std::move(s));
  }
  model.head.norm = init_layer_norm<T>(d);
  model.head.hidden = init_linear<T>(d, d, rng);
  model.head.out = init_linear<T>(d, config.output_dim(), rng);
  return model;
}

std::vector<std::size_t> token_dropout_indices(std::size_t n, double p_do, Rng* rng, bool train_mode) {
  if (n == 0) throw DataError("token dropout needs at least one token");
  std::vector<std::size_t> kept;
  if (!train_mode || p_do <= 0.0) {
    kept.resize(n);
    for (std::size_t i = 0; i < n; ++i) kept[i] = i;
    return kept;
  }
  if (rng == nullptr) throw UsageError("train-mode token dropout needs a random generator");
  const auto target = static_cast<std::size_t>(std::llround(static_cast<double>(n) * (1.0 - p_do)));
  kept = rng->sample_without_replacement(n, std::clamp<std::size_t>(target, 1, n));
  std::sort(kept.begin(), kept.end());
  return kept;
}

template <typename T>
DropoutResult<T> token_dropout(const Tensor<T>& tokens, double p_do, Rng* rng, bool train_mode) {
  auto kept = token_dropout_indices(tokens.rows(), p_do, rng, train_mode);
  if (kept.size() == tokens.rows()) return {tokens, std::move(kept)};
  return {gather_rows(tokens, std::span<const std::size_t>(kept)), std::move(kept)};
}

template <typename T>
Tensor<T> pooled_skip(const Tensor<T>& prev, std::size_t compression) {
  if (compression == 1) return prev;
  return group_mean_rows(prev, compression);
}

template <typename T>
Tensor<T> encode_bag_tokens(const FeatureBag& bag, const CCANConfig& config, std::span<const std::size_t> rows) {
  if (bag.dim() != config.feature_dim) {
    throw DimensionError("bag '" + bag.bag_id + "' has token width " + std::to_string(bag.dim()) +
                         ", model expects " + std::to_string(config.feature_dim));
  }
  const FrequencyLadder ladder = frequency_ladder(config.frequencies, config.f_max);
  const std::size_t width = config.input_width();
  std::vector<T> values;
  values.reserve(rows.size() * width);
  for (std::size_t r : rows) {
    const auto token = bag.tokens.row(r);
    values.insert(values.end(), token.begin(), token.end());
    const auto enc = encode_position(bag.coords[r], ladder, config.append_raw_coords);
    values.insert(values.end(), enc.begin(), enc.end());
  }
  return Tensor<T>({rows.size(), width}, std::move(values));
}

template <typename T>
StageOutput<T> stage_forward(const CCANModel<T>& model, std::size_t stage, const Tensor<T>& stage_context,
                             const Tensor<T>& inputs) {
  if (stage >= model.stages.size()) {
    throw UsageError("stage index " + std::to_string(stage) + " out of range for a " +
                     std::to_string(model.stages.size()) + "-stage model");
  }
  const CCANConfig& cfg = model.config;
  const StageParams<T>& sp = model.stages[stage];
  const std::size_t m = sp.latents.rows();
  AttentionOptions options{cfg.scale_mode, cfg.heads, stage, 0};
  StageOutput<T> out;
  auto run = [&](AttentionOutput<T>&& r) {
    out.records.push_back(std::move(r.record));
    ++options.layer_index;
    return std::move(r.out);
  };

  Tensor<T> x = sp.latents;
  for (std::size_t z = 0; z < cfg.repeats; ++z) {
    x = run(cross_attention_block(x, stage_context, sp.cross[z], options));
    for (std::size_t l = 0; l < cfg.self_layers; ++l) {
      x = run(self_attention_block(x, sp.self[z * cfg.self_layers + l], options));
    }
  }
  if (stage > 0) x = add(x, pooled_skip(stage_context, cfg.compression));
  x = concat_rows<T>({x, sp.class_token});
  x = run(cross_attention_block(x, inputs, sp.final_cross, options));
  x = run(self_attention_block(x, sp.final_self, options));

  out.latents_out = slice_rows(x, 0, m);
  out.class_embedding = slice_rows(x, m, m + 1);
  out.probs = sigmoid(model.head(out.class_embedding));
  return out;
}

template <typename T>
ModelOutput<T> forward(const CCANModel<T>& model, const FeatureBag& bag, Rng* rng, bool train_mode) {
  if (bag.size() == 0) throw DataError("cannot run the model on an empty bag");
  if (bag.coords.size() != bag.size()) throw DataError("bag '" + bag.bag_id + "' has mismatched coordinates");
  ModelOutput<T> out;
  out.kept_indices = token_dropout_indices(bag.size(), model.config.token_dropout, rng, train_mode);
  const Tensor<T> encoded = encode_bag_tokens<T>(bag, model.config, out.kept_indices);
  const Tensor<T> inputs = model.input_projection(encoded);

  Tensor<T> context = inputs;
  for (std::size_t j = 0; j < model.stages.size(); ++j) {
    out.stages.push_back(stage_forward(model, j, context, inputs));
    context = out.stages.back().latents_out;
  }
  const std::size_t k = model.config.output_dim();
  out.averaged_probs.assign(k, 0.0);
  for (const auto& s : out.stages)
    for (std::size_t c = 0; c < k; ++c) out.averaged_probs[c] += static_cast<double>(s.probs.data()[c]);
  for (double& p : out.averaged_probs) p /= static_cast<double>(out.stages.size());
  return out;
}

template <typename T>
Tensor<T> total_stage_loss(const ModelOutput<T>& output, std::uint32_t label, std::size_t num_classes) {
  const auto targets_d = label_targets(label, num_classes);
  const std::vector<T> targets(targets_d.begin(), targets_d.end());
  std::vector<Tensor<T>> losses;
  for (const auto& s : output.stages) losses.push_back(bce(s.probs, std::span<const T>(targets)));
  return add_all(losses);
}

#define CCAN_INSTANTIATE_MODEL(T)                                                                             \
  template struct CCANModel<T>;                                                                               \
  template CCANModel<T> init_model(const CCANConfig&, std::uint64_t);                                         \
  template DropoutResult<T> token_dropout(const Tensor<T>&, double, Rng*, bool);                              \
  template Tensor<T> pooled_skip(const Tensor<T>&, std::size_t);                                              \
  template Tensor<T> encode_bag_tokens(const FeatureBag&, const CCANConfig&, std::span<const std::size_t>);    \
  template StageOutput<T> stage_forward(const CCANModel<T>&, std::size_t, const Tensor<T>&, const Tensor<T>&); \
  template ModelOutput<T> forward(const CCANModel<T>&, const FeatureBag&, Rng*, bool);                        \
  template Tensor<T> total_stage_loss(const ModelOutput<T>&, std::uint32_t, std::size_t);

CCAN_INSTANTIATE_MODEL(float)
CCAN_INSTANTIATE_MODEL(double)

}  // namespace ccan
