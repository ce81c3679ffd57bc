#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ccan {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

namespace detail {

template <typename T>
struct Node {
  Node(Shape s, std::vector<T> d, bool rg);
  ~Node();
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;

  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents.
  std::function<void(Node&)> backward_fn;

  // Zero-initialized grad buffer of the node's size.
  std::vector<T>& grad_buffer();
};

}  // namespace detail

// Dense row-major array that participates in reverse-mode differentiation.
// Copies share the underlying storage; the graph lives as long as the newest
// tensor that references it.
template <typename T>
class Tensor {
 public:
  using Node = detail::Node<T>;

  Tensor() = default;
  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor scalar(T value) { return Tensor({1, 1}, {value}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->data.size(); }
  // Two-dimensional accessors; rank-2 tensors only.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const T> data() const { return node_->data; }
  // In-place write access for leaves (parameter updates, finite differences).
  std::span<T> mutable_data();
  T at(std::size_t r, std::size_t c) const { return node_->data[r * cols() + c]; }
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->is_leaf; }
  bool has_grad() const { return !node_->grad.empty(); }
  // Empty span until a backward pass reaches this tensor.
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad.clear(); }

  // Propagates d(this)/d(leaf) into every reachable leaf with requires_grad.
  // Leaf gradients accumulate across calls.
  void backward() const;

  // Same values, no graph history.
  Tensor detach() const;

  const std::shared_ptr<Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node> node_;
};

// Graph recording is disabled while a guard is alive on the current thread.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Counts multiply-accumulate operations performed by matrix products on the
// current thread while alive.
class MacProbe {
 public:
  MacProbe();
  std::uint64_t count() const;

 private:
  std::uint64_t start_;
};

// Peak bytes of live tensor storage on the current thread since construction.
class MemoryProbe {
 public:
  MemoryProbe();
  ~MemoryProbe();
  std::uint64_t peak_bytes() const;

 private:
  std::uint64_t baseline_;
  std::uint64_t saved_peak_;
};

namespace detail {
void add_macs(std::uint64_t n);
}

}  // namespace ccan
