#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "attention/attention.hpp"

namespace ccan {

// Architecture hyperparameters. Defaults are the published training setup.
struct CCANConfig {
  std::size_t stages = 6;           // J
  std::size_t latents = 512;        // M, latent tokens in the first stage
  std::size_t compression = 2;      // C
  std::size_t latent_dim = 512;     // D_l
  std::size_t feature_dim = 2048;   // D_f
  std::size_t repeats = 1;          // Z, cross + self groups per stage
  std::size_t self_layers = 2;      // S, self-attention layers after each cross-attention
  double token_dropout = 0.9;       // p_do
  std::size_t num_classes = 2;
  std::size_t frequencies = 6;      // I
  double f_max = 10.0;
  ScaleMode scale_mode = ScaleMode::kPerPaper;
  std::size_t heads = 1;
  bool append_raw_coords = false;
  std::uint64_t seed = 0;

  // Throws ConfigError naming the first violated constraint.
  void validate() const;

  // Stage j (0-based) holds latents / compression^j tokens.
  std::vector<std::size_t> stage_latent_counts() const;
  // One sigmoid output for binary tasks, one per class otherwise.
  std::size_t output_dim() const { return num_classes == 2 ? 1 : num_classes; }
  std::size_t input_width() const;

  bool operator==(const CCANConfig&) const = default;
};

enum class ModelKind { kCCAN = 0, kMeanPool = 1, kMaxPool = 2, kFullSelfAttention = 3 };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);
std::string to_string(ScaleMode mode);
ScaleMode parse_scale_mode(const std::string& name);

// Targets for the per-class sigmoid outputs: {label} for binary, one-hot otherwise.
std::vector<double> label_targets(std::uint32_t label, std::size_t num_classes);

}  // namespace ccan
