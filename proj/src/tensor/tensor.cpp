#include "tensor/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "common/error.hpp"

namespace ccan {

namespace {
thread_local bool t_grad_enabled = true;
thread_local std::uint64_t t_macs = 0;
thread_local std::uint64_t t_live_bytes = 0;
thread_local std::uint64_t t_peak_bytes = 0;
}  // namespace

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace detail {

template <typename T>
Node<T>::Node(Shape s, std::vector<T> d, bool rg)
    : shape(std::move(s)), data(std::move(d)), requires_grad(rg) {
  t_live_bytes += data.size() * sizeof(T);
  t_peak_bytes = std::max(t_peak_bytes, t_live_bytes);
}

template <typename T>
Node<T>::~Node() {
  t_live_bytes -= data.size() * sizeof(T);
}

template <typename T>
std::vector<T>& Node<T>::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), T(0));
  return grad;
}

void add_macs(std::uint64_t n) { t_macs += n; }

}  // namespace detail

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data, bool requires_grad) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one extent");
  std::size_t n = 1;
  for (std::size_t e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
    n *= e;
  }
  if (n != data.size()) {
    throw DimensionError("shape " + shape_string(shape) + " needs " + std::to_string(n) +
                         " values, got " + std::to_string(data.size()));
  }
  node_ = std::make_shared<Node>(std::move(shape), std::move(data), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
std::size_t Tensor<T>::rows() const {
  if (rank() != 2) throw DimensionError("expected a matrix, got shape " + shape_string(shape()));
  return node_->shape[0];
}

template <typename T>
std::size_t Tensor<T>::cols() const {
  if (rank() != 2) throw DimensionError("expected a matrix, got shape " + shape_string(shape()));
  return node_->shape[1];
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
  if (!node_->is_leaf) throw UsageError("only leaf tensors may be modified in place");
  return node_->data;
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw UsageError("item() needs a single-element tensor, got " + shape_string(shape()));
  return node_->data[0];
}

template <typename T>
void Tensor<T>::backward() const {
  if (numel() != 1) {
    throw UsageError("backward() needs a scalar loss, got shape " + shape_string(shape()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS: `order` ends up parents-before-children.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->is_leaf) n->grad.assign(n->data.size(), T(0));
  }
  node_->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->is_leaf && n->backward_fn) n->backward_fn(*n);
  }
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(node_->shape, node_->data, false);
}

template class Tensor<float>;
template class Tensor<double>;
template struct detail::Node<float>;
template struct detail::Node<double>;

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_enabled() { return t_grad_enabled; }

MacProbe::MacProbe() : start_(t_macs) {}
std::uint64_t MacProbe::count() const { return t_macs - start_; }

MemoryProbe::MemoryProbe() : baseline_(t_live_bytes), saved_peak_(t_peak_bytes) {
  t_peak_bytes = t_live_bytes;
}
MemoryProbe::~MemoryProbe() { t_peak_bytes = std::max(saved_peak_, t_peak_bytes); }
std::uint64_t MemoryProbe::peak_bytes() const { return t_peak_bytes - baseline_; }

}  // namespace ccan
