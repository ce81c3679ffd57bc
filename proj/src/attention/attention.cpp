#include "attention/attention.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"

namespace ccan {

template <typename T>
void BlockParams<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  auto add_norm = [&](const std::string& name, const LayerNormParams<T>& n) {
    out.emplace_back(prefix + name + ".gamma", n.gamma);
    out.emplace_back(prefix + name + ".beta", n.beta);
  };
  auto add_linear = [&](const std::string& name, const Linear<T>& l) {
    out.emplace_back(prefix + name + ".weight", l.weight);
    out.emplace_back(prefix + name + ".bias", l.bias);
  };
  add_norm("norm_query", norm_query);
  if (kind == AttentionKind::kCross) add_norm("norm_context", norm_context);
  add_norm("norm_mlp", norm_mlp);
  add_linear("query", query);
  add_linear("key", key);
  add_linear("value", value);
  add_linear("output", output);
  add_linear("mlp_in", mlp_in);
  add_linear("mlp_out", mlp_out);
}

template <typename T>
Linear<T> init_linear(std::size_t in, std::size_t out, Rng& rng, double stddev) {
  std::vector<T> w(in * out);
  for (T& v : w) v = static_cast<T>(rng.normal(0.0, stddev));
  return {Tensor<T>({in, out}, std::move(w), true), Tensor<T>::zeros({1, out}, true)};
}

template <typename T>
LayerNormParams<T> init_layer_norm(std::size_t width) {
  return {Tensor<T>::full({1, width}, T(1), true), Tensor<T>::zeros({1, width}, true)};
}

template <typename T>
BlockParams<T> init_block(AttentionKind kind, std::size_t width, std::size_t context_width, Rng& rng) {
  if (kind == AttentionKind::kSelf) context_width = width;
  BlockParams<T> p;
  p.kind = kind;
  p.norm_query = init_layer_norm<T>(width);
  if (kind == AttentionKind::kCross) p.norm_context = init_layer_norm<T>(context_width);
  p.norm_mlp = init_layer_norm<T>(width);
  p.query = init_linear<T>(width, width, rng);
  p.key = init_linear<T>(context_width, width, rng);
  p.value = init_linear<T>(context_width, width, rng);
  p.output = init_linear<T>(width, width, rng);
  p.mlp_in = init_linear<T>(width, 4 * width, rng);
  p.mlp_out = init_linear<T>(4 * width, width, rng);
  return p;
}

template <typename T>
AttentionOutput<T> scaled_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, double scale) {
  if (!(scale > 0.0)) throw UsageError("attention scale must be positive");
  if (q.cols() != k.cols()) {
    throw DimensionError("attention: query width " + shape_string(q.shape()) + " does not match key width " +
                         shape_string(k.shape()));
  }
  if (k.rows() != v.rows()) {
    throw DimensionError("attention: " + shape_string(k.shape()) + " keys vs " + shape_string(v.shape()) + " values");
  }
  const Tensor<T> weights = softmax(ccan::scale(matmul_transposed(q, k), static_cast<T>(1.0 / scale)), 1);
  AttentionOutput<T> result{matmul(weights, v), {}};
  result.record.matrix = Matrix(weights.rows(), weights.cols());
  std::copy(weights.data().begin(), weights.data().end(), result.record.matrix.values.begin());
  return result;
}

double attention_scale(std::size_t query_rows, std::size_t width, const AttentionOptions& options) {
  if (options.heads > 1 || options.scale_mode == ScaleMode::kPerDim) {
    return std::sqrt(static_cast<double>(width / std::max<std::size_t>(options.heads, 1)));
  }
  return std::sqrt(static_cast<double>(query_rows));
}

template <typename T>
AttentionOutput<T> multi_head_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                                        const AttentionOptions& options) {
  const std::size_t heads = options.heads;
  const std::size_t width = q.cols();
  if (heads == 0 || width % heads != 0) {
    throw ConfigError("width " + std::to_string(width) + " is not divisible by " + std::to_string(heads) + " heads");
  }
  const double scale = attention_scale(q.rows(), width, options);
  AttentionOutput<T> result;
  if (heads == 1) {
    result = scaled_attention(q, k, v, scale);
  } else {
    const std::size_t d = width / heads;
    std::vector<Tensor<T>> outs;
    Matrix mean(q.rows(), k.rows());
    for (std::size_t h = 0; h < heads; ++h) {
      auto head = scaled_attention(slice_cols(q, h * d, (h + 1) * d), slice_cols(k, h * d, (h + 1) * d),
                                   slice_cols(v, h * d, (h + 1) * d), scale);
      outs.push_back(head.out);
      for (std::size_t i = 0; i < mean.values.size(); ++i) {
        mean.values[i] += head.record.matrix.values[i] / static_cast<float>(heads);
      }
    }
    result.out = concat_cols(outs);
    result.record.matrix = std::move(mean);
  }
  result.record.stage_index = options.stage_index;
  result.record.layer_index = options.layer_index;
  return result;
}

namespace {

template <typename T>
Tensor<T> attention_and_mlp(const Tensor<T>& residual, const Tensor<T>& query_in, const Tensor<T>& context_in,
                            const BlockParams<T>& p, const AttentionOptions& options, AttentionRecord& record) {
  auto att = multi_head_attention(p.query(query_in), p.key(context_in), p.value(context_in), options);
  record = std::move(att.record);
  Tensor<T> x = add(residual, p.output(att.out));
  return add(x, p.mlp_out(gelu(p.mlp_in(p.norm_mlp(x)))));
}

}  // namespace

template <typename T>
AttentionOutput<T> cross_attention_block(const Tensor<T>& latents, const Tensor<T>& context,
                                         const BlockParams<T>& params, const AttentionOptions& options) {
  if (!context.defined() || context.numel() == 0) throw DataError("cross-attention needs a non-empty context");
  if (params.kind != AttentionKind::kCross) throw UsageError("cross_attention_block given self-attention parameters");
  AttentionOutput<T> result;
  result.out = attention_and_mlp(latents, params.norm_query(latents), params.norm_context(context), params, options,
                                 result.record);
  result.record.kind = AttentionKind::kCross;
  return result;
}

template <typename T>
AttentionOutput<T> self_attention_block(const Tensor<T>& tokens, const BlockParams<T>& params,
                                        const AttentionOptions& options) {
  if (params.kind != AttentionKind::kSelf) throw UsageError("self_attention_block given cross-attention parameters");
  AttentionOutput<T> result;
  const Tensor<T> normed = params.norm_query(tokens);
  result.out = attention_and_mlp(tokens, normed, normed, params, options, result.record);
  result.record.kind = AttentionKind::kSelf;
  return result;
}

std::uint64_t cross_block_macs(std::size_t queries, std::size_t context_rows, std::size_t width,
                               std::size_t context_width) {
  const std::uint64_t m = queries, n = context_rows, d = width, dc = context_width;
  const std::uint64_t projections = m * d * d + 2 * n * dc * d + m * d * d;  // Q, K, V, output
  const std::uint64_t attention = 2 * m * n * d;                            // scores and weighted sum
  const std::uint64_t mlp = 2 * m * d * 4 * d;
  return projections + attention + mlp;
}

std::uint64_t self_block_macs(std::size_t tokens, std::size_t width) {
  return cross_block_macs(tokens, tokens, width, width);
}

#define CCAN_INSTANTIATE_ATTENTION(T)                                                                       \
  template struct BlockParams<T>;                                                                           \
  template Linear<T> init_linear(std::size_t, std::size_t, Rng&, double);                                   \
  template LayerNormParams<T> init_layer_norm(std::size_t);                                                 \
  template BlockParams<T> init_block(AttentionKind, std::size_t, std::size_t, Rng&);                        \
  template AttentionOutput<T> scaled_attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double); \
  template AttentionOutput<T> multi_head_attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                                   const AttentionOptions&);                                \
  template AttentionOutput<T> cross_attention_block(const Tensor<T>&, const Tensor<T>&, const BlockParams<T>&, \
                                                    const AttentionOptions&);                               \
  template AttentionOutput<T> self_attention_block(const Tensor<T>&, const BlockParams<T>&, const AttentionOptions&);

CCAN_INSTANTIATE_ATTENTION(float)
CCAN_INSTANTIATE_ATTENTION(double)

}  // namespace ccan
