#include "tabfuse/tensor.hpp"

#include <unordered_set>

#include "tabfuse/errors.hpp"

namespace tabfuse {

namespace {
thread_local bool g_autograd_enabled = true;
}

bool autograd_enabled() { return g_autograd_enabled; }

NoGradScope::NoGradScope() : previous_(g_autograd_enabled) { g_autograd_enabled = false; }
NoGradScope::~NoGradScope() { g_autograd_enabled = previous_; }

void TensorNode::accumulate(const Matrix& g) {
  if (!grad_ready) {
    grad = Matrix::Zero(value.rows(), value.cols());
    grad_ready = true;
  }
  if (g.rows() != grad.rows() || g.cols() != grad.cols()) {
    throw ShapeError("gradient shape mismatch for node '" + name + "'");
  }
  grad += g;
}

void TensorNode::zero_grad() {
  if (grad_ready) grad.setZero();
}

Tensor Tensor::leaf(Matrix value, bool requires_grad, std::string name) {
  auto node = std::make_shared<TensorNode>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  node->name = std::move(name);
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Index rows, Index cols, bool requires_grad) {
  return leaf(Matrix::Zero(rows, cols), requires_grad);
}

Tensor Tensor::scalar(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return leaf(std::move(m));
}

const Matrix& Tensor::grad() const {
  if (!node_->grad_ready) {
    throw ShapeError("gradient not populated for node '" + node_->name + "'");
  }
  return node_->grad;
}

ComputationGraph::ComputationGraph(const Tensor& root) {
  if (!root.defined()) throw ShapeError("backward: undefined tensor");
  // Iterative post-order DFS: parents come out before children.
  std::unordered_set<const TensorNode*> visited;
  std::vector<std::pair<NodePtr, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      NodePtr parent = node->parents[next++];
      if (visited.insert(parent.get()).second) {
        stack.emplace_back(std::move(parent), 0);
      }
    } else {
      order_.push_back(node);
      stack.pop_back();
    }
  }
}

void ComputationGraph::backward() {
  TensorNode& root = *order_.back();
  if (root.value.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got " + std::to_string(root.value.rows()) +
                     "x" + std::to_string(root.value.cols()));
  }
  // Interior gradients are per-pass scratch: repeated calls re-seed them.
  // Leaf gradients accumulate across calls until zero_grad.
  for (const NodePtr& node : order_) {
    if (node->op != OpKind::kLeaf) {
      node->grad_ready = false;
      node->grad.resize(0, 0);
    }
  }
  root.accumulate(Matrix::Ones(1, 1));
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    TensorNode& node = **it;
    if (!node.backprop || !node.requires_grad) continue;
    if (!node.grad_ready) {
      node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
      node.grad_ready = true;
    }
    node.backprop(node, node.grad);
  }
}

void backward(const Tensor& loss) { ComputationGraph(loss).backward(); }

namespace detail {

Tensor make_op(Matrix value, OpKind op, std::vector<Tensor> parents, Backprop backprop) {
  auto node = std::make_shared<TensorNode>();
  node->value = std::move(value);
  node->op = op;
  bool needs_grad = false;
  if (g_autograd_enabled) {
    for (const Tensor& p : parents) {
      if (p.defined() && p.requires_grad()) {
        needs_grad = true;
        break;
      }
    }
  }
  if (needs_grad) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (Tensor& p : parents) node->parents.push_back(p.node());
    node->backprop = std::move(backprop);
  }
  return Tensor(std::move(node));
}

}  // namespace detail

}  // namespace tabfuse
