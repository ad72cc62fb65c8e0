#pragma once

#include <random>
#include <vector>

#include "tabfuse/ops.hpp"
#include "tabfuse/tensor.hpp"

namespace tabfuse {

struct MlpConfig {
  int input = 0;
  std::vector<int> hidden;
  int classes = 2;

  /// Imaging-embedding classifier head.
  static MlpConfig imaging(int input_width);
  /// Clinical baseline over the imputed expanded encoding.
  static MlpConfig clinical_baseline(int input_width);
};

/// Plain ReLU MLP ending in a two-class softmax.
class MlpModel {
 public:
  MlpModel(const MlpConfig& config, std::mt19937_64& init_rng);

  Tensor forward(const Matrix& x) const;
  Tensor loss(const Matrix& x, const std::vector<int>& labels,
              std::mt19937_64* dropout_rng = nullptr,
              CrossEntropyDiag* diag = nullptr) const;
  Matrix predict_proba(const Matrix& x) const;

  const std::vector<Tensor>& parameters() const { return params_; }
  std::vector<Tensor>& parameters() { return params_; }
  const MlpConfig& config() const { return config_; }

 private:
  Tensor register_param(const std::string& name, Matrix value);

  MlpConfig config_;
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
  std::vector<Tensor> params_;
};

}  // namespace tabfuse
