#include "antkit/tensor.hpp"

#include <stdexcept>
#include <unordered_set>

namespace antkit {

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::int64_t shape_numel(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

static void check_shape(const std::vector<int>& shape) {
  if (shape.empty()) throw TensorError("tensor shape must have at least one extent");
  for (int d : shape)
    if (d < 1) throw TensorError("tensor extent must be >= 1, got shape " + shape_str(shape));
}

Tensor::Tensor(std::vector<int> shape) : node_(std::make_shared<TensorNode>()) {
  check_shape(shape);
  node_->value.assign(static_cast<size_t>(shape_numel(shape)), 0.0);
  node_->shape = std::move(shape);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : node_(std::make_shared<TensorNode>()) {
  check_shape(shape);
  if (shape_numel(shape) != static_cast<std::int64_t>(data.size()))
    throw TensorError("data length " + std::to_string(data.size()) +
                      " does not match shape " + shape_str(shape));
  node_->shape = std::move(shape);
  node_->value = std::move(data);
}

Tensor Tensor::full(std::vector<int> shape, double v) {
  Tensor t(std::move(shape));
  for (double& x : t.data()) x = v;
  return t;
}

double Tensor::item() const {
  if (numel() != 1) throw TensorError("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

Tensor& Tensor::requires_grad(bool b) {
  node_->needs_grad = b;
  return *this;
}

std::vector<double>& Tensor::grad() {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  node_->grad.assign(node_->value.size(), 0.0);
}

void Tensor::backward() {
  if (numel() != 1) throw TensorError("backward() requires a scalar output");
  if (!node_->needs_grad)
    throw TensorError("backward() on a graph with no gradient-requiring inputs");

  // Iterative post-order DFS over grad-requiring ancestors.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> seen;
  std::vector<std::pair<TensorNode*, size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      TensorNode* p = n->parents[i++].get();
      if (p->needs_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->ensure_grad();
  node_->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backprop) (*it)->backprop();
}

Tensor make_result(std::vector<int> shape, std::vector<double> value,
                   std::vector<std::shared_ptr<TensorNode>> parents,
                   std::function<void(TensorNode&)> backprop) {
  auto node = std::make_shared<TensorNode>();
  check_shape(shape);
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool needs = false;
  for (const auto& p : parents)
    if (p && p->needs_grad) needs = true;
  node->needs_grad = needs;
  if (needs) {
    node->parents = std::move(parents);
    TensorNode* raw = node.get();
    node->backprop = [raw, fn = std::move(backprop)]() {
      raw->ensure_grad();
      fn(*raw);
    };
  }
  return Tensor(std::move(node));
}

}  // namespace antkit
