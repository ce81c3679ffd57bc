#include "model/config.hpp"

#include "common/error.hpp"

namespace ccan {

void CCANConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (stages == 0) fail("model.J must be at least 1");
  if (compression == 0) fail("model.C must be at least 1");
  if (latents == 0) fail("model.M must be at least 1");
  std::size_t divisor = 1;
  for (std::size_t j = 1; j < stages; ++j) {
    divisor *= compression;
    if (divisor > latents) break;
  }
  if (divisor > latents || latents % divisor != 0) {
    fail("model.M = " + std::to_string(latents) + " is not divisible by C^(J-1) with C = " +
         std::to_string(compression) + ", J = " + std::to_string(stages));
  }
  if (latent_dim == 0) fail("model.D_l must be at least 1");
  if (feature_dim == 0) fail("model.D_f must be at least 1");
  if (repeats == 0) fail("model.Z must be at least 1");
  if (!(token_dropout >= 0.0 && token_dropout < 1.0)) fail("model.p_do must lie in [0, 1)");
  if (num_classes < 2) fail("model.num_classes must be at least 2");
  if (num_classes > 256) fail("model.num_classes must fit in one byte");
  if (frequencies == 0) fail("model.I must be at least 1");
  if (!(f_max >= 1.0)) fail("model.f_max must be >= 1");
  if (heads == 0 || latent_dim % heads != 0) fail("model.heads must divide model.D_l");
}

std::vector<std::size_t> CCANConfig::stage_latent_counts() const {
  std::vector<std::size_t> counts;
  std::size_t m = latents;
  for (std::size_t j = 0; j < stages; ++j) {
    counts.push_back(m);
    m /= compression;
  }
  return counts;
}

std::size_t CCANConfig::input_width() const {
  return feature_dim + 4 * frequencies + (append_raw_coords ? 2 : 0);
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kCCAN: return "ccan";
    case ModelKind::kMeanPool: return "mean-pool";
    case ModelKind::kMaxPool: return "max-pool";
    case ModelKind::kFullSelfAttention: return "full-self-attention";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& name) {
  for (ModelKind k : {ModelKind::kCCAN, ModelKind::kMeanPool, ModelKind::kMaxPool, ModelKind::kFullSelfAttention}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown model kind '" + name + "' (expected ccan, mean-pool, max-pool, full-self-attention)");
}

std::string to_string(ScaleMode mode) { return mode == ScaleMode::kPerPaper ? "per-paper" : "per-dim"; }

ScaleMode parse_scale_mode(const std::string& name) {
  if (name == "per-paper") return ScaleMode::kPerPaper;
  if (name == "per-dim") return ScaleMode::kPerDim;
  throw ConfigError("unknown scale mode '" + name + "' (expected per-paper or per-dim)");
}

std::vector<double> label_targets(std::uint32_t label, std::size_t num_classes) {
  if (label >= num_classes) {
    throw DataError("label " + std::to_string(label) + " out of range for " + std::to_string(num_classes) + " classes");
  }
  if (num_classes == 2) return {static_cast<double>(label)};
  std::vector<double> t(num_classes, 0.0);
  t[label] = 1.0;
  return t;
}

}  // namespace ccan
