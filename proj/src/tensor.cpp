#include "hpvit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "hpvit/errors.hpp"

namespace hpvit {

std::size_t shape_numel(const Shape& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::string shape_str(const Shape& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

namespace {

void validate_dims(const Shape& dims) {
  if (dims.empty()) throw ShapeError("tensor: dims must be non-empty");
  for (auto d : dims) {
    if (d == 0) throw ShapeError("tensor: dims must be positive, got " + shape_str(dims));
  }
}

}  // namespace

Tensor Tensor::zeros(Shape dims, bool requires_grad) { return full(std::move(dims), 0.0, requires_grad); }

Tensor Tensor::full(Shape dims, double value, bool requires_grad) {
  validate_dims(dims);
  std::vector<double> data(shape_numel(dims), value);
  return from(std::move(dims), std::move(data), requires_grad);
}

Tensor Tensor::from(Shape dims, std::vector<double> data, bool requires_grad) {
  validate_dims(dims);
  if (shape_numel(dims) != data.size()) {
    throw ShapeError("tensor: " + shape_str(dims) + " needs " + std::to_string(shape_numel(dims)) +
                     " values, got " + std::to_string(data.size()));
  }
  auto node = std::make_shared<Node>();
  node->dims = std::move(dims);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  if (requires_grad) node->grad.assign(node->data.size(), 0.0);
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

Tensor Tensor::make_result(Shape dims, std::vector<double> data, std::vector<Tensor> parents,
                           std::function<void(Node&)> backward) {
  Tensor out = from(std::move(dims), std::move(data), false);
  const bool any = std::any_of(parents.begin(), parents.end(),
                               [](const Tensor& p) { return p.defined() && p.requires_grad(); });
  if (!any) return out;
  Node& n = out.node();
  n.requires_grad = true;
  n.grad.assign(n.data.size(), 0.0);
  n.parents.reserve(parents.size());
  for (auto& p : parents) n.parents.push_back(p.node_ptr());
  n.backward = std::move(backward);
  return out;
}

Node& Tensor::node() const {
  if (!node_) throw ContractError("tensor: use of undefined tensor");
  return *node_;
}

const Shape& Tensor::dims() const { return node().dims; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& d = dims();
  if (axis >= d.size()) throw ShapeError("tensor: axis " + std::to_string(axis) + " out of range for " + shape_str(d));
  return d[axis];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  const auto& d = dims();
  if (d.size() != 2) throw ShapeError("tensor::at expects a 2-D tensor, got " + shape_str(d));
  return node().data[row * d[1] + col];
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("tensor::item on non-scalar " + shape_str(dims()));
  return node().data[0];
}

void Tensor::zero_grad() {
  auto& n = node();
  if (n.requires_grad) std::fill(n.grad.begin(), n.grad.end(), 0.0);
}

void Tensor::set_requires_grad(bool on) {
  auto& n = node();
  if (!n.parents.empty()) throw ContractError("set_requires_grad: only valid on leaf tensors");
  n.requires_grad = on;
  if (on) {
    n.grad.assign(n.data.size(), 0.0);
  } else {
    n.grad.clear();
  }
}

Tensor Tensor::detach(bool requires_grad) const {
  return from(dims(), node().data, requires_grad);
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw ContractError("backward: undefined loss");
  if (loss.numel() != 1) throw ContractError("backward: loss must be scalar, got " + shape_str(loss.dims()));
  Node& root = loss.node();
  if (!root.requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{&root, 0}};
  visited.insert(&root);
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  root.grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) n->backward(*n);
  }
  for (Node* n : order) {
    if (!n->parents.empty()) {
      n->parents.clear();
      n->backward = nullptr;
    }
  }
}

}  // namespace hpvit
