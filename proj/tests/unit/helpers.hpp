#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "tabfuse/tensor.hpp"

namespace testutil {

/// Central finite differences against the analytic gradients of a scalar
/// loss. `build_loss` must rebuild the graph from the live parameter values
/// on every call.
inline double max_grad_rel_error(const std::function<tabfuse::Tensor()>& build_loss,
                                 std::vector<tabfuse::Tensor> params,
                                 double h = 1e-5) {
  using tabfuse::Index;
  using tabfuse::Matrix;
  for (tabfuse::Tensor& p : params) p.zero_grad();
  tabfuse::Tensor loss = build_loss();
  tabfuse::backward(loss);
  std::vector<Matrix> analytic;
  for (const tabfuse::Tensor& p : params) {
    analytic.push_back(p.has_grad()
                           ? p.grad()
                           : Matrix::Zero(p.rows(), p.cols()));
  }
  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Matrix& value = params[pi].mutable_value();
    for (Index i = 0; i < value.rows(); ++i) {
      for (Index j = 0; j < value.cols(); ++j) {
        const double keep = value(i, j);
        value(i, j) = keep + h;
        const double up = build_loss().value()(0, 0);
        value(i, j) = keep - h;
        const double down = build_loss().value()(0, 0);
        value(i, j) = keep;
        const double fd = (up - down) / (2.0 * h);
        const double a = analytic[pi](i, j);
        const double rel =
            std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
        worst = std::max(worst, rel);
      }
    }
  }
  return worst;
}

inline tabfuse::Matrix random_matrix(tabfuse::Index rows, tabfuse::Index cols,
                                     std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  tabfuse::Matrix m(rows, cols);
  for (tabfuse::Index i = 0; i < rows; ++i) {
    for (tabfuse::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    dir_ = std::filesystem::temp_directory_path() /
           ("tabfuse-test-" + tag + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() { std::filesystem::remove_all(dir_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string path() const { return dir_.string(); }
  std::string str(const std::string& leaf = "") const {
    return leaf.empty() ? dir_.string() : (dir_ / leaf).string();
  }

 private:
  std::filesystem::path dir_;
};

}  // namespace testutil
