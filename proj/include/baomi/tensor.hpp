#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace baomi {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

/// Raised by tensor operations when operand shapes do not fit together.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until the backward pass touches it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward_fn;

  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Dense row-major tensor of doubles. Copies share storage; every operation
/// that involves a tensor with requires_grad records itself on the graph that
/// backward() later walks. The graph is rebuilt on every forward pass.
class Tensor {
 public:
  Tensor();

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return node_->data.size(); }

  std::span<const double> data() const { return node_->data; }
  // Direct write access, for parameter updates and test perturbation only.
  std::span<double> mutable_data() { return node_->data; }
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  // Reverse-mode sweep from a scalar. Leaf grads accumulate across calls.
  void backward() const;

  // Same data, no graph history.
  Tensor detach() const;

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  // Used by the op library to create graph nodes.
  static Tensor make_result(Shape shape, std::vector<double> values,
                            std::vector<Tensor> inputs,
                            std::function<void(detail::Node&)> backward_fn);
  detail::Node& node() const { return *node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

bool grad_enabled();

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace baomi
