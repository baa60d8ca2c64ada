#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hpvit {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& dims);
std::string shape_str(const Shape& dims);

/// Graph node backing a Tensor. Ops create one node per result; `backward`
/// reads the node's `grad` and accumulates into each parent's `grad`.
struct Node {
  Shape dims;
  std::vector<double> data;
  std::vector<double> grad;  // empty unless requires_grad
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
};

/// Dense row-major array of doubles with optional reverse-mode gradient tracking.
///
/// Tensors are cheap handles: copying a Tensor shares the underlying node. The
/// graph is recorded dynamically as ops run and released by `backward`.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape dims, bool requires_grad = false);
  static Tensor full(Shape dims, double value, bool requires_grad = false);
  static Tensor from(Shape dims, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  /// Builds an op result. If no parent requires grad the parents and backward
  /// function are dropped and the result is a plain constant.
  static Tensor make_result(Shape dims, std::vector<double> data, std::vector<Tensor> parents,
                            std::function<void(Node&)> backward);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& dims() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t ndim() const { return dims().size(); }
  std::size_t numel() const { return node().data.size(); }

  std::span<const double> data() const { return node().data; }
  /// In-place access for parameter updates and perturbation. Never use on a
  /// tensor that is already part of a recorded graph you still intend to differentiate.
  std::span<double> mutable_data() { return node().data; }
  double operator[](std::size_t i) const { return node().data[i]; }
  double at(std::size_t row, std::size_t col) const;
  double item() const;

  bool requires_grad() const { return node().requires_grad; }
  std::span<const double> grad() const { return node().grad; }
  std::span<double> mutable_grad() { return node().grad; }
  void zero_grad();
  /// Turns gradient tracking on or off for a leaf tensor.
  void set_requires_grad(bool on);

  /// Deep copy of the values, detached from any graph.
  Tensor detach(bool requires_grad = false) const;

  Node& node() const;
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

/// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
/// reachable requires_grad tensor; intermediate graph links are released afterwards.
void backward(const Tensor& loss);

}  // namespace hpvit
