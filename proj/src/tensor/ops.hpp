#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tensor/tensor.hpp"

namespace ccan {

// Differentiable operations. Matrix ops take rank-2 tensors; elementwise ops
// accept any shape. Broadcasting is limited to add_bias (one row over all rows).

template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
// a · bᵀ without materializing the transpose.
template <typename T> Tensor<T> matmul_transposed(const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& x, T factor);

// axis 0 normalizes columns, axis 1 (or -1) normalizes rows.
template <typename T> Tensor<T> softmax(const Tensor<T>& x, int axis = -1);
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps = T(1e-5));
template <typename T> Tensor<T> gelu(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);

template <typename T> Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts);
template <typename T> Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts);
template <typename T> Tensor<T> slice_rows(const Tensor<T>& x, std::size_t begin, std::size_t end);
template <typename T> Tensor<T> slice_cols(const Tensor<T>& x, std::size_t begin, std::size_t end);
template <typename T> Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::size_t> indices);

// Column-wise reductions over rows: result is 1×cols.
template <typename T> Tensor<T> mean_rows(const Tensor<T>& x);
template <typename T> Tensor<T> max_rows(const Tensor<T>& x);
// Row k of the result is the mean of rows [k·group, (k+1)·group).
template <typename T> Tensor<T> group_mean_rows(const Tensor<T>& x, std::size_t group);

template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> add_all(const std::vector<Tensor<T>>& terms);

// Mean binary cross-entropy over the entries of `probs` (clamped to
// [1e-7, 1 - 1e-7]). Returns a 1×1 tensor.
template <typename T> Tensor<T> bce(const Tensor<T>& probs, std::span<const T> targets);

struct ParamGradError {
  std::string name;
  double abs_err = 0.0;
  double rel_err = 0.0;
};

struct GradReport {
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  std::vector<ParamGradError> per_parameter;
};

template <typename T>
using NamedTensors = std::vector<std::pair<std::string, Tensor<T>>>;

struct GradCheckOptions {
  double eps = 1e-3;
  // 0 checks every coordinate; otherwise an evenly strided subset per parameter.
  std::size_t max_coords_per_param = 0;
};

// Analytic gradients of loss_fn() w.r.t. each parameter (grads are zeroed first).
template <typename T>
std::vector<std::vector<double>> analytic_gradients(const std::function<Tensor<T>()>& loss_fn,
                                                    NamedTensors<T>& params);

// Central differences (f(θ+ε) − f(θ−ε)) / 2ε per checked coordinate. Coordinates
// that are not checked are reported as NaN.
template <typename T>
std::vector<std::vector<double>> numeric_gradients(const std::function<Tensor<T>()>& loss_fn,
                                                   NamedTensors<T>& params, const GradCheckOptions& options);

// rel_err uses max(|a|, |b|, 1e-6) as the denominator; NaN entries are skipped. The floor keeps
// gradients that are exactly zero (e.g. a key bias under softmax) from turning roundoff into large ratios.
GradReport compare_gradients(const std::vector<std::string>& names,
                             const std::vector<std::vector<double>>& analytic,
                             const std::vector<std::vector<double>>& numeric);

// loss_fn must be deterministic; stochastic layers have to be disabled by the caller.
template <typename T>
GradReport grad_check(const std::function<Tensor<T>()>& loss_fn, NamedTensors<T>& params,
                      const GradCheckOptions& options = {});

}  // namespace ccan
