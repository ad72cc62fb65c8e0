#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace tabfuse {

/// All numerics are 64-bit, stored row-major. Dataset scale is tiny; the
/// gradient checks need the precision.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;
using BoolArray = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class OpKind {
  kLeaf,
  kMatmul,
  kAdd,
  kAddRowVec,
  kHadamard,
  kScale,
  kScaleRows,
  kRelu,
  kSoftmaxRows,
  kMaskedSoftmax,
  kCrossEntropy,
  kSum,
  kReshape,
  kDropout,
  kLayerNorm,
  kEmbedTokens,
  kMaskedAttention,
};

struct TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

/// One record of the computation graph: the materialized value, an optional
/// gradient buffer of identical shape, and the local backward rule.
struct TensorNode {
  Matrix value;
  Matrix grad;
  bool grad_ready = false;
  bool requires_grad = false;
  OpKind op = OpKind::kLeaf;
  std::string name;
  std::vector<NodePtr> parents;
  // Receives d(loss)/d(this) and accumulates into the parents' grad buffers.
  std::function<void(TensorNode&, const Matrix&)> backprop;

  void accumulate(const Matrix& g);
  void zero_grad();
};

/// Value-semantic handle to a graph node. Copies share the node.
class Tensor {
 public:
  Tensor() = default;

  /// A graph leaf. Parameters pass requires_grad=true and a name.
  static Tensor leaf(Matrix value, bool requires_grad = false, std::string name = {});
  static Tensor zeros(Index rows, Index cols, bool requires_grad = false);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  Index size() const { return node_->value.size(); }
  std::vector<Index> shape() const { return {rows(), cols()}; }

  const Matrix& value() const { return node_->value; }
  /// In-place update hook for the optimizer; never call on interior nodes.
  Matrix& mutable_value() { return node_->value; }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->grad_ready; }
  const Matrix& grad() const;
  void zero_grad() { node_->zero_grad(); }

  const std::string& name() const { return node_->name; }
  void set_name(std::string name) { node_->name = std::move(name); }
  OpKind op() const { return node_->op; }

  NodePtr node() const { return node_; }
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

 private:
  NodePtr node_;
};

/// Topologically ordered view of the graph reachable from one root.
/// backward() seeds d(root)/d(root)=1 and replays the local rules in reverse
/// order, so every node is visited exactly once. Gradients accumulate across
/// repeated calls until zero_grad is invoked on the leaves.
class ComputationGraph {
 public:
  explicit ComputationGraph(const Tensor& root);

  void backward();
  std::size_t node_count() const { return order_.size(); }

 private:
  std::vector<NodePtr> order_;  // parents strictly before children; root last
};

/// Convenience wrapper: build the graph from `loss` and run one backward pass.
void backward(const Tensor& loss);

/// Thread-local autodiff switch. Inference paths open a NoGradScope so the
/// ops above record neither parents nor backward closures.
bool autograd_enabled();
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  bool previous_;
};

namespace detail {
using Backprop = std::function<void(TensorNode& self, const Matrix& g)>;
/// Assembles an op node. Parents and the backward closure are dropped when
/// no parent needs gradients (or autograd is disabled).
Tensor make_op(Matrix value, OpKind op, std::vector<Tensor> parents, Backprop backprop);
}  // namespace detail

}  // namespace tabfuse
