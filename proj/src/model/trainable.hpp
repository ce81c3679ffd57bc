#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "model/baseline.hpp"
#include "model/model.hpp"

namespace ccan {

// A float model of any kind, as seen by training, evaluation and checkpoints.
class TrainableModel {
 public:
  static TrainableModel create(ModelKind kind, const CCANConfig& config, std::uint64_t seed);

  ModelKind kind() const { return kind_; }
  const CCANConfig& config() const;
  NamedTensors<float> parameters() const;

  // Per-stage probability tensors (one entry for baselines), graph attached.
  std::vector<Tensor<float>> stage_probs(const FeatureBag& bag, Rng* rng, bool train_mode) const;

  // Eval-mode averaged probabilities without graph recording.
  std::vector<double> predict(const FeatureBag& bag) const;

  // Nullptr for baselines.
  const CCANModel<float>* ccan() const { return std::get_if<CCANModel<float>>(&impl_); }
  const BaselineModel<float>* baseline() const { return std::get_if<BaselineModel<float>>(&impl_); }

  std::vector<std::vector<float>> snapshot() const;
  void restore(const std::vector<std::vector<float>>& values);

 private:
  ModelKind kind_ = ModelKind::kCCAN;
  std::variant<CCANModel<float>, BaselineModel<float>> impl_;
};

// "CCAN" u16 version u8 kind, config fields, u32 parameter count, then per
// parameter: u16 name length, name, u8 rank, u32 extents, float32 values. All little-endian.
inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const TrainableModel& model);
TrainableModel decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const TrainableModel& model, const std::string& path);
TrainableModel load_checkpoint(const std::string& path);

}  // namespace ccan
