#pragma once

#include <vector>

#include "tabfuse/tensor.hpp"

namespace tabfuse {

/// Standard matrix product [m×k]·[k×n] -> [m×n].
/// Backward: dA = G·Bᵀ, dB = Aᵀ·G.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Elementwise sum of two same-shape tensors.
Tensor add(const Tensor& a, const Tensor& b);

/// Adds a 1×C row vector to every row of x (bias broadcast).
Tensor add_rowvec(const Tensor& x, const Tensor& row);

/// Elementwise product.
Tensor hadamard(const Tensor& a, const Tensor& b);

/// Multiplication by a compile-time constant scalar.
Tensor scale(const Tensor& x, double s);

/// Multiplies row i by the constant factor f(i). Factors carry no gradient;
/// this is the lane-zeroing primitive for missing tokens.
Tensor scale_rows(const Tensor& x, const Eigen::VectorXd& factors);

Tensor relu(const Tensor& x);

/// Numerically stable rowwise softmax.
Tensor softmax_rows(const Tensor& logits);

/// Rowwise softmax of `scores + mask` where mask entries are 0 or -inf.
/// -inf entries are excluded from the arithmetic entirely; a row whose
/// entries are all masked yields the all-zeros row rather than NaN.
/// Requires square inputs (attention use).
Tensor masked_softmax(const Tensor& scores, const Tensor& mask);

struct CrossEntropyDiag {
  int clamped = 0;  // count of true-class probabilities clamped at 1e-12
};

/// Mean over rows of -log p[true class]. Rows must be valid probability
/// vectors (sum 1 within 1e-6). When `probabilities` is the direct output of
/// softmax_rows, the gradient is routed straight to the logits with the fused
/// softmax+cross-entropy rule; otherwise the plain -1/p rule applies with the
/// probability clamped at 1e-12 (counted in diag).
Tensor cross_entropy(const Tensor& probabilities, const std::vector<int>& labels,
                     CrossEntropyDiag* diag = nullptr);

/// Sum of all elements, as a 1×1 tensor.
Tensor sum(const Tensor& x);

/// Row-major reinterpretation to rows×cols (element count preserved).
Tensor reshape(const Tensor& x, Index rows, Index cols);

/// Inverted dropout with an externally supplied 0/1 keep mask:
/// y = x ⊙ mask / keep_prob. The mask is sampled by the caller so that
/// randomness stays in named RNG substreams and tests can pin it.
Tensor dropout(const Tensor& x, const Matrix& keep_mask, double keep_prob);

/// Per-row layer normalization with affine parameters gamma, beta (1×C).
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

}  // namespace tabfuse
