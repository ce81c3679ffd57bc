#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tensor/ops.hpp"

namespace ccan {

struct AdamWHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct AdamWState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;  // steps already taken
};

// One decoupled-weight-decay Adam update with bias-corrected moments. The state
// is sized on first use.
void adamw_step(std::span<float> params, std::span<const float> grads, AdamWState& state, double lr,
                const AdamWHyper& hyper);

// lr_min + (lr_max - lr_min)·(1 + cos(π t / T)) / 2.
double cosine_lr(std::size_t t, std::size_t total, double lr_max, double lr_min);

// AdamW over a model's named parameters; tensors without a gradient see g = 0.
class AdamW {
 public:
  AdamW(NamedTensors<float> params, const AdamWHyper& hyper);

  void step(double lr);
  // Multiplies every accumulated gradient by factor.
  void scale_grads(double factor);
  void zero_grads();
  std::size_t steps() const { return steps_; }

 private:
  NamedTensors<float> params_;
  AdamWHyper hyper_;
  std::vector<AdamWState> states_;
  std::vector<float> zeros_;
  std::size_t steps_ = 0;
};

}  // namespace ccan
