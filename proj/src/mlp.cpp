#include "tabfuse/mlp.hpp"

#include <cmath>

#include "tabfuse/errors.hpp"

namespace tabfuse {

MlpConfig MlpConfig::imaging(int input_width) {
  return {input_width, {256, 64}, 2};
}

MlpConfig MlpConfig::clinical_baseline(int input_width) {
  return {input_width, {64, 32}, 2};
}

Tensor MlpModel::register_param(const std::string& name, Matrix value) {
  Tensor t = Tensor::leaf(std::move(value), true, name);
  params_.push_back(t);
  return t;
}

MlpModel::MlpModel(const MlpConfig& config, std::mt19937_64& init_rng)
    : config_(config) {
  if (config_.input < 1) {
    throw ArgumentError("mlp: input width must be at least 1");
  }
  if (config_.classes < 2) {
    throw ArgumentError("mlp: need at least 2 classes");
  }
  for (int h : config_.hidden) {
    if (h < 1) throw ArgumentError("mlp: hidden width must be at least 1");
  }
  std::vector<int> widths;
  widths.push_back(config_.input);
  for (int h : config_.hidden) widths.push_back(h);
  widths.push_back(config_.classes);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const Index fan_in = widths[l];
    const Index fan_out = widths[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix w(fan_in, fan_out);
    for (Index i = 0; i < fan_in; ++i) {
      for (Index j = 0; j < fan_out; ++j) w(i, j) = dist(init_rng);
    }
    const std::string tag = "fc" + std::to_string(l);
    weights_.push_back(register_param(tag + ".w", std::move(w)));
    biases_.push_back(register_param(tag + ".b", Matrix::Zero(1, fan_out)));
  }
}

Tensor MlpModel::forward(const Matrix& x) const {
  if (x.cols() != config_.input) {
    throw ShapeError("mlp: expected " + std::to_string(config_.input) +
                     " input columns, got " + std::to_string(x.cols()));
  }
  Tensor h = Tensor::leaf(x);
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = add_rowvec(matmul(h, weights_[l]), biases_[l]);
    if (l + 1 < weights_.size()) h = relu(h);
  }
  return softmax_rows(h);
}

Tensor MlpModel::loss(const Matrix& x, const std::vector<int>& labels,
                      std::mt19937_64* /*dropout_rng*/,
                      CrossEntropyDiag* diag) const {
  return cross_entropy(forward(x), labels, diag);
}

Matrix MlpModel::predict_proba(const Matrix& x) const {
  NoGradScope guard;
  return forward(x).value();
}

}  // namespace tabfuse
