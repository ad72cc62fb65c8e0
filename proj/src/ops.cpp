#include "tabfuse/ops.hpp"

#include <cmath>
#include <limits>

#include "tabfuse/errors.hpp"

namespace tabfuse {

namespace {

std::string shape_str(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
}

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a) + " times " +
                     shape_str(b));
  }
  Matrix out = a.value() * b.value();
  return detail::make_op(std::move(out), OpKind::kMatmul, {a, b},
                         [](TensorNode& self, const Matrix& g) {
                           TensorNode& a = *self.parents[0];
                           TensorNode& b = *self.parents[1];
                           if (a.requires_grad) a.accumulate(g * b.value.transpose());
                           if (b.requires_grad) b.accumulate(a.value.transpose() * g);
                         });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Matrix out = a.value() + b.value();
  return detail::make_op(std::move(out), OpKind::kAdd, {a, b},
                         [](TensorNode& self, const Matrix& g) {
                           for (auto& p : self.parents) {
                             if (p->requires_grad) p->accumulate(g);
                           }
                         });
}

Tensor add_rowvec(const Tensor& x, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != x.cols()) {
    throw ShapeError("add_rowvec: expected 1x" + std::to_string(x.cols()) + " bias, got " +
                     shape_str(row));
  }
  Matrix out = x.value();
  out.rowwise() += Eigen::RowVectorXd(row.value().row(0));
  return detail::make_op(std::move(out), OpKind::kAddRowVec, {x, row},
                         [](TensorNode& self, const Matrix& g) {
                           TensorNode& x = *self.parents[0];
                           TensorNode& r = *self.parents[1];
                           if (x.requires_grad) x.accumulate(g);
                           if (r.requires_grad) {
                             Matrix gr(1, g.cols());
                             gr.row(0) = g.colwise().sum();
                             r.accumulate(gr);
                           }
                         });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "hadamard");
  Matrix out = a.value().cwiseProduct(b.value());
  return detail::make_op(std::move(out), OpKind::kHadamard, {a, b},
                         [](TensorNode& self, const Matrix& g) {
                           TensorNode& a = *self.parents[0];
                           TensorNode& b = *self.parents[1];
                           if (a.requires_grad) a.accumulate(g.cwiseProduct(b.value));
                           if (b.requires_grad) b.accumulate(g.cwiseProduct(a.value));
                         });
}

Tensor scale(const Tensor& x, double s) {
  Matrix out = x.value() * s;
  return detail::make_op(std::move(out), OpKind::kScale, {x},
                         [s](TensorNode& self, const Matrix& g) {
                           TensorNode& x = *self.parents[0];
                           if (x.requires_grad) x.accumulate(g * s);
                         });
}

Tensor scale_rows(const Tensor& x, const Eigen::VectorXd& factors) {
  if (factors.size() != x.rows()) {
    throw ShapeError("scale_rows: " + std::to_string(factors.size()) + " factors for " +
                     shape_str(x));
  }
  Matrix out = factors.asDiagonal() * x.value();
  return detail::make_op(std::move(out), OpKind::kScaleRows, {x},
                         [factors](TensorNode& self, const Matrix& g) {
                           TensorNode& x = *self.parents[0];
                           if (x.requires_grad) x.accumulate(factors.asDiagonal() * g);
                         });
}

Tensor relu(const Tensor& x) {
  Matrix out = x.value().cwiseMax(0.0);
  return detail::make_op(std::move(out), OpKind::kRelu, {x},
                         [](TensorNode& self, const Matrix& g) {
                           TensorNode& x = *self.parents[0];
                           if (!x.requires_grad) return;
                           Matrix gx =
                               (x.value.array() > 0.0).select(g, Matrix::Zero(g.rows(), g.cols()));
                           x.accumulate(gx);
                         });
}

Tensor softmax_rows(const Tensor& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.value().row(i).maxCoeff();
    Eigen::ArrayXd e = (logits.value().row(i).array() - m).exp();
    out.row(i) = (e / e.sum()).matrix();
  }
  return detail::make_op(std::move(out), OpKind::kSoftmaxRows, {logits},
                         [](TensorNode& self, const Matrix& g) {
                           TensorNode& x = *self.parents[0];
                           if (!x.requires_grad) return;
                           const Matrix& p = self.value;
                           Matrix gx(p.rows(), p.cols());
                           for (Index i = 0; i < p.rows(); ++i) {
                             const double dot = g.row(i).dot(p.row(i));
                             gx.row(i) = p.row(i).cwiseProduct(
                                 (g.row(i).array() - dot).matrix());
                           }
                           x.accumulate(gx);
                         });
}

Tensor masked_softmax(const Tensor& scores, const Tensor& mask) {
  if (scores.rows() != scores.cols()) {
    throw ShapeError("masked_softmax: input must be square, got " + shape_str(scores));
  }
  require_same_shape(scores, mask, "masked_softmax");
  const Index n = scores.rows();
  Matrix out = Matrix::Zero(n, n);
  const Matrix& s = scores.value();
  const Matrix& m = mask.value();
  for (Index i = 0; i < n; ++i) {
    double mx = kNegInf;
    for (Index j = 0; j < n; ++j) {
      if (m(i, j) == kNegInf) continue;  // tested before any arithmetic
      mx = std::max(mx, s(i, j) + m(i, j));
    }
    if (mx == kNegInf) continue;  // fully masked row stays all-zero
    double denom = 0.0;
    for (Index j = 0; j < n; ++j) {
      if (m(i, j) == kNegInf) continue;
      const double e = std::exp(s(i, j) + m(i, j) - mx);
      out(i, j) = e;
      denom += e;
    }
    out.row(i) /= denom;
  }
  Matrix masked = (m.array() == kNegInf).cast<double>();
  return detail::make_op(std::move(out), OpKind::kMaskedSoftmax, {scores, mask},
                         [masked](TensorNode& self, const Matrix& g) {
                           TensorNode& s = *self.parents[0];
                           if (!s.requires_grad) return;
                           const Matrix& p = self.value;
                           Matrix gs = Matrix::Zero(p.rows(), p.cols());
                           for (Index i = 0; i < p.rows(); ++i) {
                             const double dot = g.row(i).dot(p.row(i));
                             for (Index j = 0; j < p.cols(); ++j) {
                               if (masked(i, j) != 0.0) continue;
                               gs(i, j) = p(i, j) * (g(i, j) - dot);
                             }
                           }
                           s.accumulate(gs);
                         });
}

Tensor cross_entropy(const Tensor& probabilities, const std::vector<int>& labels,
                     CrossEntropyDiag* diag) {
  const Index n = probabilities.rows();
  const Index classes = probabilities.cols();
  if (n == 0) throw ArgumentError("cross_entropy: empty batch");
  if (static_cast<Index>(labels.size()) != n) {
    throw ArgumentError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(n) + " rows");
  }
  const Matrix& p = probabilities.value();
  double loss = 0.0;
  int clamped = 0;
  for (Index i = 0; i < n; ++i) {
    const double row_sum = p.row(i).sum();
    if (std::abs(row_sum - 1.0) > 1e-6) {
      throw ArgumentError("cross_entropy: row " + std::to_string(i) +
                          " is not a probability vector (sum " + std::to_string(row_sum) + ")");
    }
    const int y = labels[i];
    if (y < 0 || y >= classes) {
      throw ArgumentError("cross_entropy: label " + std::to_string(y) + " out of range");
    }
    double py = p(i, y);
    if (py < 1e-12) {
      py = 1e-12;
      ++clamped;
    }
    loss -= std::log(py);
  }
  loss /= static_cast<double>(n);
  if (diag) diag->clamped = clamped;

  Matrix out(1, 1);
  out(0, 0) = loss;
  std::vector<int> y = labels;
  return detail::make_op(
      std::move(out), OpKind::kCrossEntropy, {probabilities},
      [y](TensorNode& self, const Matrix& g) {
        TensorNode& probs = *self.parents[0];
        if (!probs.requires_grad) return;
        const double gs = g(0, 0);
        const double inv_n = 1.0 / static_cast<double>(probs.value.rows());
        // Fused rule: when the probabilities come straight from softmax_rows,
        // route d(loss)/d(logits) = (p - onehot)/n past the softmax node.
        if (probs.op == OpKind::kSoftmaxRows && !probs.parents.empty() &&
            probs.parents[0]->requires_grad) {
          TensorNode& logits = *probs.parents[0];
          Matrix gl = probs.value;
          for (Index i = 0; i < gl.rows(); ++i) gl(i, y[i]) -= 1.0;
          logits.accumulate(gl * (gs * inv_n));
          return;
        }
        Matrix gp = Matrix::Zero(probs.value.rows(), probs.value.cols());
        for (Index i = 0; i < gp.rows(); ++i) {
          const double py = std::max(probs.value(i, y[i]), 1e-12);
          gp(i, y[i]) = -gs * inv_n / py;
        }
        probs.accumulate(gp);
      });
}

Tensor sum(const Tensor& x) {
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return detail::make_op(std::move(out), OpKind::kSum, {x},
                         [](TensorNode& self, const Matrix& g) {
                           TensorNode& x = *self.parents[0];
                           if (!x.requires_grad) return;
                           x.accumulate(Matrix::Constant(x.value.rows(), x.value.cols(), g(0, 0)));
                         });
}

Tensor reshape(const Tensor& x, Index rows, Index cols) {
  if (rows * cols != x.size()) {
    throw ShapeError("reshape: cannot view " + shape_str(x) + " as " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
  Matrix out = Eigen::Map<const Matrix>(x.value().data(), rows, cols);
  return detail::make_op(std::move(out), OpKind::kReshape, {x},
                         [](TensorNode& self, const Matrix& g) {
                           TensorNode& x = *self.parents[0];
                           if (!x.requires_grad) return;
                           x.accumulate(
                               Eigen::Map<const Matrix>(g.data(), x.value.rows(), x.value.cols()));
                         });
}

Tensor dropout(const Tensor& x, const Matrix& keep_mask, double keep_prob) {
  if (keep_prob <= 0.0 || keep_prob > 1.0) {
    throw ArgumentError("dropout: keep probability must be in (0,1]");
  }
  if (keep_mask.rows() != x.rows() || keep_mask.cols() != x.cols()) {
    throw ShapeError("dropout: mask shape mismatch");
  }
  Matrix out = x.value().cwiseProduct(keep_mask) / keep_prob;
  return detail::make_op(std::move(out), OpKind::kDropout, {x},
                         [keep_mask, keep_prob](TensorNode& self, const Matrix& g) {
                           TensorNode& x = *self.parents[0];
                           if (!x.requires_grad) return;
                           x.accumulate(g.cwiseProduct(keep_mask) / keep_prob);
                         });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (gamma.rows() != 1 || gamma.cols() != x.cols() || beta.rows() != 1 ||
      beta.cols() != x.cols()) {
    throw ShapeError("layer_norm: affine parameters must be 1x" + std::to_string(x.cols()));
  }
  const Index n = x.rows(), c = x.cols();
  Matrix xhat(n, c);
  Eigen::VectorXd inv_std(n);
  for (Index i = 0; i < n; ++i) {
    const double mu = x.value().row(i).mean();
    const double var = (x.value().row(i).array() - mu).square().mean();
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std(i) = inv;
    xhat.row(i) = (x.value().row(i).array() - mu).matrix() * inv;
  }
  Matrix out = xhat;
  out.array().rowwise() *= gamma.value().row(0).array();
  out.rowwise() += Eigen::RowVectorXd(beta.value().row(0));
  return detail::make_op(
      std::move(out), OpKind::kLayerNorm, {x, gamma, beta},
      [xhat, inv_std](TensorNode& self, const Matrix& g) {
        TensorNode& x = *self.parents[0];
        TensorNode& gamma = *self.parents[1];
        TensorNode& beta = *self.parents[2];
        if (gamma.requires_grad) {
          Matrix gg(1, g.cols());
          gg.row(0) = g.cwiseProduct(xhat).colwise().sum();
          gamma.accumulate(gg);
        }
        if (beta.requires_grad) {
          Matrix gb(1, g.cols());
          gb.row(0) = g.colwise().sum();
          beta.accumulate(gb);
        }
        if (!x.requires_grad) return;
        Matrix gx(g.rows(), g.cols());
        for (Index i = 0; i < g.rows(); ++i) {
          Eigen::RowVectorXd dxhat =
              g.row(i).cwiseProduct(gamma.value.row(0));
          const double m1 = dxhat.mean();
          const double m2 = dxhat.cwiseProduct(xhat.row(i)).mean();
          gx.row(i) = inv_std(i) * (dxhat.array() - m1 - xhat.row(i).array() * m2).matrix();
        }
        x.accumulate(gx);
      });
}

}  // namespace tabfuse
