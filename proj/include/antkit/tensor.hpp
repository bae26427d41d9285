#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace antkit {

std::string shape_str(const std::vector<int>& shape);
std::int64_t shape_numel(const std::vector<int>& shape);

// One node of the computation graph. Values are immutable once produced by an
// op; leaves (parameters) are mutated in place by the trainer between steps.
struct TensorNode {
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first needed, then value-sized
  bool needs_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Pulls this node's grad into the parents' grads. Captures the node itself
  // by raw pointer so the closure does not keep its owner alive.
  std::function<void()> backprop;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

// Value-semantic handle; copies alias the same node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor full(std::vector<int> shape, double v);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
  int ndim() const { return static_cast<int>(node_->shape.size()); }
  std::int64_t numel() const { return static_cast<std::int64_t>(node_->value.size()); }

  std::vector<double>& data() { return node_->value; }
  const std::vector<double>& data() const { return node_->value; }
  double item() const;

  Tensor& requires_grad(bool b = true);
  bool needs_grad() const { return node_->needs_grad; }
  std::vector<double>& grad();
  void zero_grad();

  // Reverse-mode sweep from a scalar. Seeds d(out)/d(out)=1, then visits the
  // graph in reverse topological order.
  void backward();

  TensorNode* raw() const { return node_.get(); }
  const std::shared_ptr<TensorNode>& ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}
  std::shared_ptr<TensorNode> node_;

  friend Tensor make_result(std::vector<int>, std::vector<double>,
                            std::vector<std::shared_ptr<TensorNode>>,
                            std::function<void(TensorNode&)>);
};

// Builds an op result. The backprop callback receives the finished node; it is
// only retained when some parent wants gradients, so pure inference drops the
// graph as it goes.
Tensor make_result(std::vector<int> shape, std::vector<double> value,
                   std::vector<std::shared_ptr<TensorNode>> parents,
                   std::function<void(TensorNode&)> backprop);

struct TensorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace antkit
