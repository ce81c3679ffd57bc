#include "tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "common/error.hpp"

namespace ccan {

namespace {

constexpr double kRelErrFloor = 1e-6;

template <typename T>
using NodePtr = detail::Node<T>*;

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, const std::vector<const Tensor<T>*>& inputs,
                      std::function<void(detail::Node<T>&)> backward_fn) {
  auto node = std::make_shared<detail::Node<T>>(std::move(shape), std::move(data), false);
  if (grad_enabled()) {
    bool any = false;
    for (const Tensor<T>* in : inputs) any = any || in->requires_grad();
    if (any) {
      node->requires_grad = true;
      node->is_leaf = false;
      for (const Tensor<T>* in : inputs) node->parents.push_back(in->node());
      node->backward_fn = std::move(backward_fn);
    }
  }
  return Tensor<T>(std::move(node));
}

template <typename T>
void require_matrix(const Tensor<T>& x, const char* op) {
  if (!x.defined() || x.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " +
                         (x.defined() ? shape_string(x.shape()) : std::string("undefined")));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

// Rows × last-axis view used by row-wise ops on any rank.
template <typename T>
std::pair<std::size_t, std::size_t> row_view(const Tensor<T>& x) {
  const std::size_t last = x.shape().back();
  return {x.numel() / last, last};
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner extents differ, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  std::vector<T> out(m * n, T(0));
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    T* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T s = pa[i * k + p];
      const T* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += s * brow[j];
    }
  }
  detail::add_macs(static_cast<std::uint64_t>(m) * k * n);
  NodePtr<T> na = a.node().get(), nb = b.node().get();
  return make_result<T>({m, n}, std::move(out), {&a, &b}, [na, nb, m, k, n](detail::Node<T>& self) {
    const T* g = self.grad.data();
    if (na->requires_grad) {
      T* ga = na->grad_buffer().data();
      const T* pb = nb->data.data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          T acc = 0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * pb[p * n + j];
          ga[i * k + p] += acc;
        }
    }
    if (nb->requires_grad) {
      T* gb = nb->grad_buffer().data();
      const T* pa = na->data.data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const T s = pa[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += s * g[i * n + j];
        }
    }
  });
}

template <typename T>
Tensor<T> matmul_transposed(const Tensor<T>& a, const Tensor<T>& b) {
  require_matrix(a, "matmul_transposed");
  require_matrix(b, "matmul_transposed");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) {
    throw DimensionError("matmul_transposed: inner extents differ, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()) + "^T");
  }
  std::vector<T> out(m * n);
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      T acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += pa[i * k + p] * pb[j * k + p];
      out[i * n + j] = acc;
    }
  detail::add_macs(static_cast<std::uint64_t>(m) * k * n);
  NodePtr<T> na = a.node().get(), nb = b.node().get();
  return make_result<T>({m, n}, std::move(out), {&a, &b}, [na, nb, m, k, n](detail::Node<T>& self) {
    const T* g = self.grad.data();
    if (na->requires_grad) {
      T* ga = na->grad_buffer().data();
      const T* pb = nb->data.data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const T s = g[i * n + j];
          for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += s * pb[j * k + p];
        }
    }
    if (nb->requires_grad) {
      T* gb = nb->grad_buffer().data();
      const T* pa = na->data.data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const T s = g[i * n + j];
          for (std::size_t p = 0; p < k; ++p) gb[j * k + p] += s * pa[i * k + p];
        }
    }
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  NodePtr<T> na = a.node().get(), nb = b.node().get();
  return make_result<T>(a.shape(), std::move(out), {&a, &b}, [na, nb](detail::Node<T>& self) {
    for (NodePtr<T> p : {na, nb}) {
      if (!p->requires_grad) continue;
      auto& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  const auto [rows, cols] = row_view(x);
  if (bias.numel() != cols) {
    throw DimensionError("add_bias: bias " + shape_string(bias.shape()) + " does not match rows of " +
                         shape_string(x.shape()));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += bias.data()[c];
  NodePtr<T> nx = x.node().get(), nb = bias.node().get();
  return make_result<T>(x.shape(), std::move(out), {&x, &bias},
                        [nx, nb, rows = rows, cols = cols](detail::Node<T>& self) {
                          if (nx->requires_grad) {
                            auto& g = nx->grad_buffer();
                            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                          }
                          if (nb->requires_grad) {
                            auto& g = nb->grad_buffer();
                            for (std::size_t r = 0; r < rows; ++r)
                              for (std::size_t c = 0; c < cols; ++c) g[c] += self.grad[r * cols + c];
                          }
                        });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  NodePtr<T> na = a.node().get(), nb = b.node().get();
  return make_result<T>(a.shape(), std::move(out), {&a, &b}, [na, nb](detail::Node<T>& self) {
    if (na->requires_grad) {
      auto& g = na->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * nb->data[i];
    }
    if (nb->requires_grad) {
      auto& g = nb->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * na->data[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * factor;
  NodePtr<T> nx = x.node().get();
  return make_result<T>(x.shape(), std::move(out), {&x}, [nx, factor](detail::Node<T>& self) {
    auto& g = nx->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  const int rank = static_cast<int>(x.rank());
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw UsageError("softmax: axis out of range for " + shape_string(x.shape()));
  std::size_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= x.shape()[d];
  for (int d = axis + 1; d < rank; ++d) inner *= x.shape()[d];
  const std::size_t len = x.shape()[axis];
  const auto in = x.data();
  for (T v : in) {
    if (!std::isfinite(v)) throw NumericError("softmax: non-finite input");
  }
  std::vector<T> out(x.numel());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * len * inner + i;
      T mx = in[base];
      for (std::size_t k = 1; k < len; ++k) mx = std::max(mx, in[base + k * inner]);
      T total = 0;
      for (std::size_t k = 0; k < len; ++k) {
        const T e = std::exp(in[base + k * inner] - mx);
        out[base + k * inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < len; ++k) out[base + k * inner] /= total;
    }
  NodePtr<T> nx = x.node().get();
  return make_result<T>(x.shape(), std::move(out), {&x}, [nx, outer, inner, len](detail::Node<T>& self) {
    auto& g = nx->grad_buffer();
    const auto& y = self.data;
    const auto& dy = self.grad;
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t base = o * len * inner + i;
        T dot = 0;
        for (std::size_t k = 0; k < len; ++k) dot += dy[base + k * inner] * y[base + k * inner];
        for (std::size_t k = 0; k < len; ++k) {
          const std::size_t idx = base + k * inner;
          g[idx] += y[idx] * (dy[idx] - dot);
        }
      }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  const auto [rows, cols] = row_view(x);
  if (gamma.numel() != cols || beta.numel() != cols) {
    throw DimensionError("layer_norm: affine parameters must have " + std::to_string(cols) + " entries");
  }
  std::vector<T> xhat(x.numel()), inv_std(rows), out(x.numel());
  const auto in = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    T mean = 0;
    for (std::size_t c = 0; c < cols; ++c) mean += in[r * cols + c];
    mean /= static_cast<T>(cols);
    T var = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      const T d = in[r * cols + c] - mean;
      var += d * d;
    }
    var /= static_cast<T>(cols);
    inv_std[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t i = r * cols + c;
      xhat[i] = (in[i] - mean) * inv_std[r];
      out[i] = xhat[i] * gamma.data()[c] + beta.data()[c];
    }
  }
  NodePtr<T> nx = x.node().get(), ng = gamma.node().get(), nb = beta.node().get();
  return make_result<T>(
      x.shape(), std::move(out), {&x, &gamma, &beta},
      [nx, ng, nb, rows = rows, cols = cols, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](detail::Node<T>& self) {
        const auto& dy = self.grad;
        if (ng->requires_grad) {
          auto& g = ng->grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) g[c] += dy[r * cols + c] * xhat[r * cols + c];
        }
        if (nb->requires_grad) {
          auto& g = nb->grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) g[c] += dy[r * cols + c];
        }
        if (nx->requires_grad) {
          auto& g = nx->grad_buffer();
          const auto& gam = ng->data;
          for (std::size_t r = 0; r < rows; ++r) {
            T mean_d = 0, mean_dx = 0;
            for (std::size_t c = 0; c < cols; ++c) {
              const std::size_t i = r * cols + c;
              const T d = dy[i] * gam[c];
              mean_d += d;
              mean_dx += d * xhat[i];
            }
            mean_d /= static_cast<T>(cols);
            mean_dx /= static_cast<T>(cols);
            for (std::size_t c = 0; c < cols; ++c) {
              const std::size_t i = r * cols + c;
              g[i] += inv_std[r] * (dy[i] * gam[c] - mean_d - xhat[i] * mean_dx);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = x.data()[i];
    out[i] = T(0.5) * v * (T(1) + std::erf(v * inv_sqrt2));
  }
  NodePtr<T> nx = x.node().get();
  return make_result<T>(x.shape(), std::move(out), {&x}, [nx, inv_sqrt2](detail::Node<T>& self) {
    auto& g = nx->grad_buffer();
    const T inv_sqrt_2pi = inv_sqrt2 * std::numbers::inv_sqrtpi_v<T>;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T v = nx->data[i];
      const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
      const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
      g[i] += self.grad[i] * (cdf + v * pdf);
    }
  });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = x.data()[i];
    if (v >= 0) {
      out[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      out[i] = e / (T(1) + e);
    }
  }
  NodePtr<T> nx = x.node().get();
  return make_result<T>(x.shape(), std::move(out), {&x}, [nx](detail::Node<T>& self) {
    auto& g = nx->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T y = self.data[i];
      g[i] += self.grad[i] * y * (T(1) - y);
    }
  });
}

template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw UsageError("concat_rows: nothing to concatenate");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  std::vector<const Tensor<T>*> inputs;
  for (const auto& p : parts) {
    require_matrix(p, "concat_rows");
    if (p.cols() != cols) throw DimensionError("concat_rows: column mismatch " + shape_string(p.shape()));
    rows += p.rows();
    inputs.push_back(&p);
  }
  std::vector<T> out;
  out.reserve(rows * cols);
  std::vector<NodePtr<T>> nodes;
  for (const auto& p : parts) {
    out.insert(out.end(), p.data().begin(), p.data().end());
    nodes.push_back(p.node().get());
  }
  return make_result<T>({rows, cols}, std::move(out), inputs, [nodes](detail::Node<T>& self) {
    std::size_t offset = 0;
    for (NodePtr<T> p : nodes) {
      if (p->requires_grad) {
        auto& g = p->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[offset + i];
      }
      offset += p->data.size();
    }
  });
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw UsageError("concat_cols: nothing to concatenate");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  std::vector<const Tensor<T>*> inputs;
  std::vector<NodePtr<T>> nodes;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.rows() != rows) throw DimensionError("concat_cols: row mismatch " + shape_string(p.shape()));
    cols += p.cols();
    inputs.push_back(&p);
    nodes.push_back(p.node().get());
    widths.push_back(p.cols());
  }
  std::vector<T> out(rows * cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.cols();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(p.data().begin() + static_cast<std::ptrdiff_t>(r * w), w, out.begin() + static_cast<std::ptrdiff_t>(r * cols + offset));
    offset += w;
  }
  return make_result<T>({rows, cols}, std::move(out), inputs,
                        [nodes, widths, rows, cols](detail::Node<T>& self) {
                          std::size_t off = 0;
                          for (std::size_t k = 0; k < nodes.size(); ++k) {
                            const std::size_t w = widths[k];
                            if (nodes[k]->requires_grad) {
                              auto& g = nodes[k]->grad_buffer();
                              for (std::size_t r = 0; r < rows; ++r)
                                for (std::size_t c = 0; c < w; ++c) g[r * w + c] += self.grad[r * cols + off + c];
                            }
                            off += w;
                          }
                        });
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  require_matrix(x, "slice_rows");
  if (begin >= end || end > x.rows()) {
    throw DimensionError("slice_rows: invalid range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") for " + shape_string(x.shape()));
  }
  const std::size_t cols = x.cols();
  std::vector<T> out(x.data().begin() + static_cast<std::ptrdiff_t>(begin * cols),
                     x.data().begin() + static_cast<std::ptrdiff_t>(end * cols));
  NodePtr<T> nx = x.node().get();
  return make_result<T>({end - begin, cols}, std::move(out), {&x}, [nx, begin, cols](detail::Node<T>& self) {
    auto& g = nx->grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * cols + i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  require_matrix(x, "slice_cols");
  if (begin >= end || end > x.cols()) {
    throw DimensionError("slice_cols: invalid range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") for " + shape_string(x.shape()));
  }
  const std::size_t rows = x.rows(), cols = x.cols(), w = end - begin;
  std::vector<T> out(rows * w);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < w; ++c) out[r * w + c] = x.data()[r * cols + begin + c];
  NodePtr<T> nx = x.node().get();
  return make_result<T>({rows, w}, std::move(out), {&x}, [nx, begin, rows, cols, w](detail::Node<T>& self) {
    auto& g = nx->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < w; ++c) g[r * cols + begin + c] += self.grad[r * w + c];
  });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::size_t> indices) {
  require_matrix(x, "gather_rows");
  if (indices.empty()) throw DimensionError("gather_rows: no rows selected");
  const std::size_t cols = x.cols();
  std::vector<T> out;
  out.reserve(indices.size() * cols);
  for (std::size_t idx : indices) {
    if (idx >= x.rows()) throw DimensionError("gather_rows: row " + std::to_string(idx) + " out of range");
    const auto row = x.data().subspan(idx * cols, cols);
    out.insert(out.end(), row.begin(), row.end());
  }
  NodePtr<T> nx = x.node().get();
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return make_result<T>({idx.size(), cols}, std::move(out), {&x}, [nx, idx, cols](detail::Node<T>& self) {
    auto& g = nx->grad_buffer();
    for (std::size_t k = 0; k < idx.size(); ++k)
      for (std::size_t c = 0; c < cols; ++c) g[idx[k] * cols + c] += self.grad[k * cols + c];
  });
}

template <typename T>
Tensor<T> mean_rows(const Tensor<T>& x) {
  return group_mean_rows(x, x.rows());
}

template <typename T>
Tensor<T> max_rows(const Tensor<T>& x) {
  require_matrix(x, "max_rows");
  const std::size_t rows = x.rows(), cols = x.cols();
  std::vector<T> out(x.data().begin(), x.data().begin() + static_cast<std::ptrdiff_t>(cols));
  std::vector<std::size_t> arg(cols, 0);
  for (std::size_t r = 1; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const T v = x.data()[r * cols + c];
      if (v > out[c]) {
        out[c] = v;
        arg[c] = r;
      }
    }
  NodePtr<T> nx = x.node().get();
  return make_result<T>({1, cols}, std::move(out), {&x}, [nx, arg, cols](detail::Node<T>& self) {
    auto& g = nx->grad_buffer();
    for (std::size_t c = 0; c < cols; ++c) g[arg[c] * cols + c] += self.grad[c];
  });
}

template <typename T>
Tensor<T> group_mean_rows(const Tensor<T>& x, std::size_t group) {
  require_matrix(x, "group_mean_rows");
  const std::size_t rows = x.rows(), cols = x.cols();
  if (group == 0 || rows % group != 0) {
    throw DimensionError("group_mean_rows: " + std::to_string(rows) + " rows are not divisible into groups of " +
                         std::to_string(group));
  }
  const std::size_t out_rows = rows / group;
  const T inv = T(1) / static_cast<T>(group);
  std::vector<T> out(out_rows * cols, T(0));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[(r / group) * cols + c] += x.data()[r * cols + c];
  for (T& v : out) v *= inv;
  NodePtr<T> nx = x.node().get();
  return make_result<T>({out_rows, cols}, std::move(out), {&x}, [nx, rows, cols, group, inv](detail::Node<T>& self) {
    auto& g = nx->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += self.grad[(r / group) * cols + c] * inv;
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T total = 0;
  for (T v : x.data()) total += v;
  NodePtr<T> nx = x.node().get();
  return make_result<T>({1, 1}, {total}, {&x}, [nx](detail::Node<T>& self) {
    auto& g = nx->grad_buffer();
    for (T& v : g) v += self.grad[0];
  });
}

template <typename T>
Tensor<T> add_all(const std::vector<Tensor<T>>& terms) {
  if (terms.empty()) throw UsageError("add_all: no terms");
  std::vector<T> out(terms.front().data().begin(), terms.front().data().end());
  std::vector<const Tensor<T>*> inputs{&terms.front()};
  std::vector<NodePtr<T>> nodes{terms.front().node().get()};
  for (std::size_t k = 1; k < terms.size(); ++k) {
    require_same_shape(terms.front(), terms[k], "add_all");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += terms[k].data()[i];
    inputs.push_back(&terms[k]);
    nodes.push_back(terms[k].node().get());
  }
  return make_result<T>(terms.front().shape(), std::move(out), inputs, [nodes](detail::Node<T>& self) {
    for (NodePtr<T> p : nodes) {
      if (!p->requires_grad) continue;
      auto& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> bce(const Tensor<T>& probs, std::span<const T> targets) {
  if (targets.size() != probs.numel()) {
    throw DimensionError("bce: " + std::to_string(targets.size()) + " targets for " +
                         shape_string(probs.shape()) + " probabilities");
  }
  const T lo = T(1e-7), hi = T(1) - T(1e-7);
  const std::size_t n = probs.numel();
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T p = std::clamp(probs.data()[i], lo, hi);
    const T t = targets[i];
    total -= t * std::log(p) + (T(1) - t) * std::log(T(1) - p);
  }
  total /= static_cast<T>(n);
  NodePtr<T> np = probs.node().get();
  std::vector<T> tgt(targets.begin(), targets.end());
  return make_result<T>({1, 1}, {total}, {&probs}, [np, tgt, lo, hi, n](detail::Node<T>& self) {
    auto& g = np->grad_buffer();
    for (std::size_t i = 0; i < n; ++i) {
      const T raw = np->data[i];
      if (raw < lo || raw > hi) continue;  // clamped: flat
      g[i] += self.grad[0] * (raw - tgt[i]) / (raw * (T(1) - raw)) / static_cast<T>(n);
    }
  });
}

template <typename T>
std::vector<std::vector<double>> analytic_gradients(const std::function<Tensor<T>()>& loss_fn,
                                                    NamedTensors<T>& params) {
  for (auto& [name, p] : params) {
    if (!p.is_leaf() || !p.requires_grad()) throw UsageError("grad check parameter '" + name + "' is not a trainable leaf");
    p.zero_grad();
  }
  const Tensor<T> loss = loss_fn();
  loss.backward();
  std::vector<std::vector<double>> grads;
  for (auto& [name, p] : params) {
    std::vector<double> g(p.numel(), 0.0);
    if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), g.begin());
    grads.push_back(std::move(g));
    p.zero_grad();
  }
  return grads;
}

template <typename T>
std::vector<std::vector<double>> numeric_gradients(const std::function<Tensor<T>()>& loss_fn,
                                                   NamedTensors<T>& params, const GradCheckOptions& options) {
  if (!(options.eps > 0.0)) throw UsageError("grad check eps must be positive");
  NoGradGuard no_grad;
  const T first = loss_fn().item();
  const T second = loss_fn().item();
  if (first != second) {
    throw UsageError("grad check needs a deterministic loss; disable dropout and other stochastic layers");
  }
  std::vector<std::vector<double>> grads;
  for (auto& [name, p] : params) {
    const std::size_t n = p.numel();
    std::vector<double> g(n, std::numeric_limits<double>::quiet_NaN());
    std::vector<std::size_t> coords;
    if (options.max_coords_per_param == 0 || n <= options.max_coords_per_param) {
      for (std::size_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (std::size_t i = 0; i < options.max_coords_per_param; ++i) coords.push_back(i * n / options.max_coords_per_param);
    }
    auto values = p.mutable_data();
    for (std::size_t i : coords) {
      const T saved = values[i];
      const T up = static_cast<T>(static_cast<double>(saved) + options.eps);
      const T down = static_cast<T>(static_cast<double>(saved) - options.eps);
      values[i] = up;
      const double f_up = static_cast<double>(loss_fn().item());
      values[i] = down;
      const double f_down = static_cast<double>(loss_fn().item());
      values[i] = saved;
      g[i] = (f_up - f_down) / (static_cast<double>(up) - static_cast<double>(down));
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

GradReport compare_gradients(const std::vector<std::string>& names,
                             const std::vector<std::vector<double>>& analytic,
                             const std::vector<std::vector<double>>& numeric) {
  if (names.size() != analytic.size() || names.size() != numeric.size()) {
    throw UsageError("compare_gradients: parameter count mismatch");
  }
  GradReport report;
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (analytic[k].size() != numeric[k].size()) throw UsageError("compare_gradients: size mismatch for " + names[k]);
    ParamGradError e{names[k], 0.0, 0.0};
    for (std::size_t i = 0; i < analytic[k].size(); ++i) {
      const double a = analytic[k][i], b = numeric[k][i];
      if (std::isnan(b)) continue;
      const double abs_err = std::abs(a - b);
      const double rel_err = abs_err / std::max({std::abs(a), std::abs(b), kRelErrFloor});
      e.abs_err = std::max(e.abs_err, abs_err);
      e.rel_err = std::max(e.rel_err, rel_err);
    }
    report.max_abs_err = std::max(report.max_abs_err, e.abs_err);
    report.max_rel_err = std::max(report.max_rel_err, e.rel_err);
    report.per_parameter.push_back(std::move(e));
  }
  return report;
}

template <typename T>
GradReport grad_check(const std::function<Tensor<T>()>& loss_fn, NamedTensors<T>& params,
                      const GradCheckOptions& options) {
  auto numeric = numeric_gradients(loss_fn, params, options);
  auto analytic = analytic_gradients(loss_fn, params);
  std::vector<std::string> names;
  for (const auto& [name, p] : params) names.push_back(name);
  return compare_gradients(names, analytic, numeric);
}

#define CCAN_INSTANTIATE_OPS(T)                                                                            \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                           \
  template Tensor<T> matmul_transposed(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                              \
  template Tensor<T> add_bias(const Tensor<T>&, const Tensor<T>&);                                         \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                              \
  template Tensor<T> scale(const Tensor<T>&, T);                                                           \
  template Tensor<T> softmax(const Tensor<T>&, int);                                                       \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);                  \
  template Tensor<T> gelu(const Tensor<T>&);                                                               \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                            \
  template Tensor<T> concat_rows(const std::vector<Tensor<T>>&);                                           \
  template Tensor<T> concat_cols(const std::vector<Tensor<T>>&);                                           \
  template Tensor<T> slice_rows(const Tensor<T>&, std::size_t, std::size_t);                               \
  template Tensor<T> slice_cols(const Tensor<T>&, std::size_t, std::size_t);                               \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const std::size_t>);                          \
  template Tensor<T> mean_rows(const Tensor<T>&);                                                          \
  template Tensor<T> max_rows(const Tensor<T>&);                                                           \
  template Tensor<T> group_mean_rows(const Tensor<T>&, std::size_t);                                       \
  template Tensor<T> sum(const Tensor<T>&);                                                                \
  template Tensor<T> add_all(const std::vector<Tensor<T>>&);                                               \
  template Tensor<T> bce(const Tensor<T>&, std::span<const T>);                                            \
  template std::vector<std::vector<double>> analytic_gradients(const std::function<Tensor<T>()>&,          \
                                                               NamedTensors<T>&);                          \
  template std::vector<std::vector<double>> numeric_gradients(const std::function<Tensor<T>()>&,           \
                                                              NamedTensors<T>&, const GradCheckOptions&);  \
  template GradReport grad_check(const std::function<Tensor<T>()>&, NamedTensors<T>&, const GradCheckOptions&);

CCAN_INSTANTIATE_OPS(float)
CCAN_INSTANTIATE_OPS(double)

}  // namespace ccan
