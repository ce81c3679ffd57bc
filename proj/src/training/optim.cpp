#include "training/optim.hpp"

#include <cmath>
#include <numbers>

#include "common/error.hpp"

namespace ccan {

void adamw_step(std::span<float> params, std::span<const float> grads, AdamWState& state, double lr,
                const AdamWHyper& h) {
  if (grads.size() != params.size()) throw DimensionError("gradient size does not match the parameter");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) throw DimensionError("optimizer state does not match the parameter");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  const double decay = 1.0 - lr * h.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double theta = static_cast<double>(params[i]) * decay;
    state.m[i] = h.beta1 * state.m[i] + (1.0 - h.beta1) * g;
    state.v[i] = h.beta2 * state.v[i] + (1.0 - h.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    theta -= lr * m_hat / (std::sqrt(v_hat) + h.eps);
    params[i] = static_cast<float>(theta);
  }
}

double cosine_lr(std::size_t t, std::size_t total, double lr_max, double lr_min) {
  if (total == 0) throw UsageError("cosine schedule needs a positive horizon");
  if (t > total) t = total;
  const double phase = std::numbers::pi * static_cast<double>(t) / static_cast<double>(total);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(phase));
}

AdamW::AdamW(NamedTensors<float> params, const AdamWHyper& hyper)
    : params_(std::move(params)), hyper_(hyper), states_(params_.size()) {}

void AdamW::step(double lr) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor<float>& p = params_[i].second;
    std::span<const float> g = p.grad();
    if (g.empty()) {
      zeros_.assign(p.numel(), 0.0f);
      g = zeros_;
    }
    adamw_step(p.mutable_data(), g, states_[i], lr, hyper_);
  }
  ++steps_;
}

void AdamW::scale_grads(double factor) {
  for (auto& [name, p] : params_) {
    if (!p.has_grad()) continue;
    for (float& g : p.mutable_grad()) g = static_cast<float>(g * factor);
  }
}

void AdamW::zero_grads() {
  for (auto& [name, p] : params_) p.zero_grad();
}

}  // namespace ccan
