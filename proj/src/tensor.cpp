#include "baomi/tensor.hpp"

#include <numeric>
#include <unordered_set>
#include <utility>

namespace baomi {

namespace {
thread_local bool g_grad_enabled = true;
}

std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor::Tensor() : node_(std::make_shared<detail::Node>()) {
  node_->shape = {0};
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto node = std::make_shared<detail::Node>();
  node->data.assign(element_count(shape), value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (element_count(shape) != values.size()) {
    throw ShapeError("tensor of shape " + to_string(shape) + " cannot hold " +
                     std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     to_string(shape()));
  }
  return node_->shape[axis];
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item() on tensor of shape " + to_string(shape()));
  }
  return node_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  if (index.size() != rank()) throw ShapeError("index rank mismatch");
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= node_->shape[axis]) throw ShapeError("index out of range");
    flat = flat * node_->shape[axis] + i;
    ++axis;
  }
  return node_->data[flat];
}

Tensor Tensor::detach() const {
  auto node = std::make_shared<detail::Node>();
  node->shape = node_->shape;
  node->data = node_->data;
  return Tensor(std::move(node));
}

Tensor Tensor::make_result(Shape shape, std::vector<double> values,
                           std::vector<Tensor> inputs,
                           std::function<void(detail::Node&)> backward_fn) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  if (g_grad_enabled) {
    for (const Tensor& in : inputs) {
      if (in.requires_grad()) node->requires_grad = true;
    }
  }
  if (node->requires_grad) {
    node->parents.reserve(inputs.size());
    for (Tensor& in : inputs) node->parents.push_back(std::move(in.node_));
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

void Tensor::backward() const {
  if (numel() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " +
                     to_string(shape()));
  }
  if (!requires_grad()) {
    throw std::logic_error("backward() on a tensor that is not on the graph");
  }

  // Iterative post-order DFS; reversed, it is a topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
  // Release interior gradients; leaves keep theirs.
  for (detail::Node* node : order) {
    if (node->backward_fn && node != node_.get()) {
      std::vector<double>().swap(node->grad);
    }
  }
}

}  // namespace baomi
