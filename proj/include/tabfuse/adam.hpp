#pragma once

#include <span>
#include <unordered_map>

#include "tabfuse/tensor.hpp"

namespace tabfuse {

/// Per-parameter Adam accumulators; shapes always match the parameter.
struct AdamState {
  Matrix m;
  Matrix v;
};

/// Adam with bias correction. Weight decay is decoupled: an additional
/// -lr*wd*theta term next to the moment update, never folded into the
/// gradient.
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8, double weight_decay = 0.0);

  /// One update over the given parameters. Parameters whose gradient buffer
  /// was never populated are treated as having zero gradient. A non-finite
  /// gradient aborts with a TrainError naming the parameter.
  void step(std::span<const Tensor> params);

  void set_learning_rate(double lr) { lr_ = lr; }
  double learning_rate() const { return lr_; }
  long step_count() const { return t_; }

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  double weight_decay_;
  long t_ = 0;
  std::unordered_map<const TensorNode*, AdamState> state_;
};

}  // namespace tabfuse
