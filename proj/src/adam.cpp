#include "tabfuse/adam.hpp"

#include <cmath>

#include "tabfuse/errors.hpp"

namespace tabfuse {

Adam::Adam(double learning_rate, double beta1, double beta2, double epsilon,
           double weight_decay)
    : lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(epsilon),
      weight_decay_(weight_decay) {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ArgumentError("Adam: learning rate must be positive and finite");
  }
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw ArgumentError("Adam: betas must lie in [0, 1)");
  }
}

void Adam::step(std::span<const Tensor> params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const Tensor& p : params) {
    TensorNode* node = p.node().get();
    Matrix& value = node->value;
    const Matrix grad = node->grad_ready
                            ? node->grad
                            : Matrix::Zero(value.rows(), value.cols());
    if (!grad.allFinite()) {
      throw TrainError("Adam: non-finite gradient for parameter '" +
                       node->name + "'");
    }
    AdamState& st = state_[node];
    if (st.m.size() == 0) {
      st.m = Matrix::Zero(value.rows(), value.cols());
      st.v = Matrix::Zero(value.rows(), value.cols());
    }
    st.m = beta1_ * st.m + (1.0 - beta1_) * grad;
    st.v = beta2_ * st.v + (1.0 - beta2_) * grad.cwiseProduct(grad);
    const Matrix m_hat = st.m / bc1;
    const Matrix v_hat = st.v / bc2;
    Matrix update =
        m_hat.array() / (v_hat.array().sqrt() + eps_);
    if (weight_decay_ != 0.0) {
      update += weight_decay_ * value;
    }
    value -= lr_ * update;
  }
}

}  // namespace tabfuse
