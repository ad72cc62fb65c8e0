#include "tabfuse/naim.hpp"

#include <cmath>
#include <limits>
#include <memory>

#include "tabfuse/errors.hpp"

namespace tabfuse {

namespace {

Matrix& grad_buffer(TensorNode& node) {
  if (!node.grad_ready) {
    node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
    node.grad_ready = true;
  }
  return node.grad;
}

}  // namespace

int NaimConfig::head_dim() const {
  if (d_model < 1 || heads < 1 || d_model % heads != 0) {
    throw ArgumentError("naim: heads must divide d_model (d_model=" +
                        std::to_string(d_model) +
                        ", heads=" + std::to_string(heads) + ")");
  }
  return d_model / heads;
}

NaimBatch NaimBatch::from_dataset(const EncodedDataset& ds,
                                  const std::vector<int>& rows) {
  NaimBatch batch;
  batch.values.resize(static_cast<Index>(rows.size()), ds.token_values.cols());
  batch.observed.resize(static_cast<Index>(rows.size()),
                        ds.token_observed.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int r = rows[i];
    if (r < 0 || r >= ds.rows()) {
      throw ArgumentError("batch: row " + std::to_string(r) + " out of range");
    }
    batch.values.row(static_cast<Index>(i)) = ds.token_values.row(r);
    batch.observed.row(static_cast<Index>(i)) = ds.token_observed.row(r);
  }
  return batch;
}

Matrix build_mask(const Eigen::Array<bool, Eigen::Dynamic, 1>& observed) {
  const Index f = observed.size();
  const double ninf = -std::numeric_limits<double>::infinity();
  Matrix mask = Matrix::Zero(f, f);
  for (Index i = 0; i < f; ++i) {
    for (Index j = 0; j < f; ++j) {
      if (!observed(i) || !observed(j)) mask(i, j) = ninf;
    }
  }
  return mask;
}

Tensor masked_multihead_attention(const Tensor& q, const Tensor& k,
                                  const Tensor& v, const BoolArray& observed,
                                  int heads, std::vector<Matrix>* trace) {
  const Index bsz = observed.rows();
  const Index f = observed.cols();
  const Index d = q.cols();
  if (k.rows() != q.rows() || k.cols() != d || v.rows() != q.rows() ||
      v.cols() != d) {
    throw ShapeError("attention: q, k, v must share one shape");
  }
  if (q.rows() != bsz * f) {
    throw ShapeError("attention: token count " + std::to_string(q.rows()) +
                     " does not match " + std::to_string(bsz) + " rows x " +
                     std::to_string(f) + " features");
  }
  if (heads < 1 || d % heads != 0) {
    throw ShapeError("attention: heads must divide the model width");
  }
  const Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  const Matrix& qv = q.value();
  const Matrix& kv = k.value();
  const Matrix& vv = v.value();

  auto obs_idx = std::make_shared<std::vector<std::vector<Index>>>(
      static_cast<std::size_t>(bsz));
  auto probs = std::make_shared<std::vector<Matrix>>(
      static_cast<std::size_t>(bsz * heads));
  if (trace != nullptr) {
    trace->assign(static_cast<std::size_t>(bsz * heads), Matrix::Zero(f, f));
  }

  Matrix out = Matrix::Zero(bsz * f, d);
  for (Index b = 0; b < bsz; ++b) {
    std::vector<Index>& o = (*obs_idx)[static_cast<std::size_t>(b)];
    for (Index j = 0; j < f; ++j) {
      if (observed(b, j)) o.push_back(j);
    }
    const Index m = static_cast<Index>(o.size());
    if (m == 0) continue;  // every lane stays zero
    for (int h = 0; h < heads; ++h) {
      const Index col0 = static_cast<Index>(h) * dh;
      Matrix qo(m, dh), ko(m, dh), vo(m, dh);
      for (Index i = 0; i < m; ++i) {
        const Index row = b * f + o[static_cast<std::size_t>(i)];
        qo.row(i) = qv.block(row, col0, 1, dh);
        ko.row(i) = kv.block(row, col0, 1, dh);
        vo.row(i) = vv.block(row, col0, 1, dh);
      }
      Matrix scores = (qo * ko.transpose()) * scale;
      Matrix p(m, m);
      for (Index i = 0; i < m; ++i) {
        const double peak = scores.row(i).maxCoeff();
        Eigen::ArrayXd e = (scores.row(i).array() - peak).exp();
        p.row(i) = (e / e.sum()).matrix();
      }
      (*probs)[static_cast<std::size_t>(b * heads + h)] = p;
      const Matrix mixed = p * vo;
      for (Index i = 0; i < m; ++i) {
        out.block(b * f + o[static_cast<std::size_t>(i)], col0, 1, dh) =
            mixed.row(i);
      }
      if (trace != nullptr) {
        Matrix& full = (*trace)[static_cast<std::size_t>(b * heads + h)];
        for (Index i = 0; i < m; ++i) {
          for (Index j = 0; j < m; ++j) {
            full(o[static_cast<std::size_t>(i)], o[static_cast<std::size_t>(j)]) =
                p(i, j);
          }
        }
      }
    }
  }

  auto backprop = [obs_idx, probs, heads, dh, f, scale](TensorNode& self,
                                                        const Matrix& g) {
    TensorNode& qn = *self.parents[0];
    TensorNode& kn = *self.parents[1];
    TensorNode& vn = *self.parents[2];
    const Index bsz2 = static_cast<Index>(obs_idx->size());
    for (Index b = 0; b < bsz2; ++b) {
      const std::vector<Index>& o = (*obs_idx)[static_cast<std::size_t>(b)];
      const Index m = static_cast<Index>(o.size());
      if (m == 0) continue;
      for (int h = 0; h < heads; ++h) {
        const Index col0 = static_cast<Index>(h) * dh;
        const Matrix& p = (*probs)[static_cast<std::size_t>(b * heads + h)];
        Matrix go(m, dh), qo(m, dh), ko(m, dh), vo(m, dh);
        for (Index i = 0; i < m; ++i) {
          const Index row = b * f + o[static_cast<std::size_t>(i)];
          go.row(i) = g.block(row, col0, 1, dh);
          qo.row(i) = qn.value.block(row, col0, 1, dh);
          ko.row(i) = kn.value.block(row, col0, 1, dh);
          vo.row(i) = vn.value.block(row, col0, 1, dh);
        }
        if (vn.requires_grad) {
          const Matrix dvo = p.transpose() * go;
          Matrix& vg = grad_buffer(vn);
          for (Index i = 0; i < m; ++i) {
            vg.block(b * f + o[static_cast<std::size_t>(i)], col0, 1, dh) +=
                dvo.row(i);
          }
        }
        if (qn.requires_grad || kn.requires_grad) {
          const Matrix dp = go * vo.transpose();
          Matrix ds(m, m);
          for (Index i = 0; i < m; ++i) {
            const double inner = dp.row(i).dot(p.row(i));
            ds.row(i) =
                p.row(i).cwiseProduct(dp.row(i) -
                                      Eigen::RowVectorXd::Constant(m, inner));
          }
          if (qn.requires_grad) {
            const Matrix dqo = scale * (ds * ko);
            Matrix& qg = grad_buffer(qn);
            for (Index i = 0; i < m; ++i) {
              qg.block(b * f + o[static_cast<std::size_t>(i)], col0, 1, dh) +=
                  dqo.row(i);
            }
          }
          if (kn.requires_grad) {
            const Matrix dko = scale * (ds.transpose() * qo);
            Matrix& kg = grad_buffer(kn);
            for (Index i = 0; i < m; ++i) {
              kg.block(b * f + o[static_cast<std::size_t>(i)], col0, 1, dh) +=
                  dko.row(i);
            }
          }
        }
      }
    }
  };
  return detail::make_op(std::move(out), OpKind::kMaskedAttention, {q, k, v},
                         backprop);
}

Tensor NaimModel::register_param(const std::string& name, Matrix value) {
  Tensor t = Tensor::leaf(std::move(value), true, name);
  params_.push_back(t);
  return t;
}

NaimModel::NaimModel(const FeatureSchema& schema, const NaimConfig& config,
                     std::mt19937_64& init_rng)
    : schema_(schema), config_(config) {
  config_.head_dim();  // validates d_model/heads
  if (schema_.size() == 0) {
    throw ArgumentError("naim: schema has no features");
  }
  if (config_.layers < 0) {
    throw ArgumentError("naim: negative layer count");
  }
  if (config_.ffn < 1) {
    throw ArgumentError("naim: ffn width must be at least 1");
  }
  if (config_.dropout < 0.0 || config_.dropout >= 1.0) {
    throw ArgumentError("naim: dropout must lie in [0, 1)");
  }
  const Index d = config_.d_model;
  auto uniform_init = [&init_rng](Index rows, Index cols, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
      for (Index j = 0; j < cols; ++j) m(i, j) = dist(init_rng);
    }
    return m;
  };
  const double dbound = 1.0 / std::sqrt(static_cast<double>(d));

  for (const Feature& feat : schema_.features()) {
    FeatureEmbed fe;
    fe.numeric_like = feat.kind != FeatureKind::kCategorical;
    const Index table_rows =
        fe.numeric_like ? 2 : static_cast<Index>(feat.categories.size());
    fe.table = register_param("embed." + feat.name + ".table",
                              uniform_init(table_rows, d, dbound));
    fe.bias = register_param("embed." + feat.name + ".bias", Matrix::Zero(1, d));
    embeds_.push_back(fe);
  }
  for (int l = 0; l < config_.layers; ++l) {
    const std::string prefix = "enc" + std::to_string(l) + ".";
    Layer layer;
    layer.wq = register_param(prefix + "wq", uniform_init(d, d, dbound));
    layer.bq = register_param(prefix + "bq", Matrix::Zero(1, d));
    layer.wk = register_param(prefix + "wk", uniform_init(d, d, dbound));
    layer.bk = register_param(prefix + "bk", Matrix::Zero(1, d));
    layer.wv = register_param(prefix + "wv", uniform_init(d, d, dbound));
    layer.bv = register_param(prefix + "bv", Matrix::Zero(1, d));
    layer.wo = register_param(prefix + "wo", uniform_init(d, d, dbound));
    layer.bo = register_param(prefix + "bo", Matrix::Zero(1, d));
    layer.ln1_gamma = register_param(prefix + "ln1.gamma", Matrix::Ones(1, d));
    layer.ln1_beta = register_param(prefix + "ln1.beta", Matrix::Zero(1, d));
    layer.ffn_w1 = register_param(
        prefix + "ffn.w1", uniform_init(d, config_.ffn, dbound));
    layer.ffn_b1 = register_param(prefix + "ffn.b1", Matrix::Zero(1, config_.ffn));
    layer.ffn_w2 = register_param(
        prefix + "ffn.w2",
        uniform_init(config_.ffn, d,
                     1.0 / std::sqrt(static_cast<double>(config_.ffn))));
    layer.ffn_b2 = register_param(prefix + "ffn.b2", Matrix::Zero(1, d));
    layer.ln2_gamma = register_param(prefix + "ln2.gamma", Matrix::Ones(1, d));
    layer.ln2_beta = register_param(prefix + "ln2.beta", Matrix::Zero(1, d));
    layers_.push_back(layer);
  }
  const Index flat = static_cast<Index>(schema_.size()) * d;
  head_w_ = register_param(
      "head.w",
      uniform_init(flat, 2, 1.0 / std::sqrt(static_cast<double>(flat))));
  head_b_ = register_param("head.b", Matrix::Zero(1, 2));
}

Tensor NaimModel::embed(const NaimBatch& batch) const {
  const Index bsz = batch.values.rows();
  const Index f = static_cast<Index>(schema_.size());
  if (batch.values.cols() != f || batch.observed.rows() != bsz ||
      batch.observed.cols() != f) {
    throw ShapeError("embed: batch has " + std::to_string(batch.values.cols()) +
                     " features, schema has " + std::to_string(f));
  }
  const Index d = config_.d_model;
  Matrix out(bsz * f, d);
  std::vector<char> numeric_like(static_cast<std::size_t>(f));
  for (Index j = 0; j < f; ++j) {
    numeric_like[static_cast<std::size_t>(j)] =
        embeds_[static_cast<std::size_t>(j)].numeric_like ? 1 : 0;
  }
  std::vector<Tensor> parents;
  parents.reserve(static_cast<std::size_t>(2 * f));
  for (Index j = 0; j < f; ++j) {
    parents.push_back(embeds_[static_cast<std::size_t>(j)].table);
    parents.push_back(embeds_[static_cast<std::size_t>(j)].bias);
  }
  for (Index r = 0; r < bsz; ++r) {
    for (Index j = 0; j < f; ++j) {
      const FeatureEmbed& fe = embeds_[static_cast<std::size_t>(j)];
      const Matrix& table = fe.table.value();
      const Matrix& bias = fe.bias.value();
      const Index t = r * f + j;
      if (fe.numeric_like) {
        if (batch.observed(r, j)) {
          out.row(t) = bias.row(0) + batch.values(r, j) * table.row(1);
        } else {
          out.row(t) = bias.row(0) + table.row(0);
        }
      } else {
        if (batch.observed(r, j)) {
          const long code = std::llround(batch.values(r, j));
          if (code < 0 || code >= table.rows()) {
            throw ShapeError("embed: code " + std::to_string(code) +
                             " out of range for feature '" +
                             schema_.at(static_cast<std::size_t>(j)).name +
                             "'");
          }
          out.row(t) = bias.row(0) + table.row(code);
        } else {
          out.row(t) = bias.row(0);  // the padding row is an implicit zero
        }
      }
    }
  }

  Matrix values = batch.values;
  BoolArray observed = batch.observed;
  auto backprop = [values, observed, numeric_like, f](TensorNode& self,
                                                      const Matrix& g) {
    const Index bsz2 = observed.rows();
    for (Index r = 0; r < bsz2; ++r) {
      for (Index j = 0; j < f; ++j) {
        TensorNode& table = *self.parents[static_cast<std::size_t>(2 * j)];
        TensorNode& bias = *self.parents[static_cast<std::size_t>(2 * j + 1)];
        const Index t = r * f + j;
        if (bias.requires_grad) {
          grad_buffer(bias).row(0) += g.row(t);
        }
        if (!table.requires_grad) continue;
        if (numeric_like[static_cast<std::size_t>(j)] != 0) {
          if (observed(r, j)) {
            grad_buffer(table).row(1) += values(r, j) * g.row(t);
          } else {
            grad_buffer(table).row(0) += g.row(t);
          }
        } else if (observed(r, j)) {
          const long code = std::llround(values(r, j));
          grad_buffer(table).row(code) += g.row(t);
        }
      }
    }
  };
  return detail::make_op(std::move(out), OpKind::kEmbedTokens,
                         std::move(parents), backprop);
}

Tensor NaimModel::encode(const Tensor& tokens, const NaimBatch& batch,
                         std::mt19937_64* dropout_rng,
                         AttentionTrace* trace) const {
  const Index bsz = batch.rows();
  const Index f = static_cast<Index>(schema_.size());
  if (tokens.rows() != bsz * f || tokens.cols() != config_.d_model) {
    throw ShapeError("encode: token matrix has the wrong shape");
  }
  Eigen::VectorXd lane(bsz * f);
  for (Index r = 0; r < bsz; ++r) {
    for (Index j = 0; j < f; ++j) {
      lane(r * f + j) = batch.observed(r, j) ? 1.0 : 0.0;
    }
  }
  auto maybe_dropout = [&](Tensor t) {
    if (dropout_rng == nullptr || config_.dropout <= 0.0) return t;
    const double keep = 1.0 - config_.dropout;
    std::bernoulli_distribution bern(keep);
    Matrix mask(t.rows(), t.cols());
    for (Index i = 0; i < mask.rows(); ++i) {
      for (Index j = 0; j < mask.cols(); ++j) {
        mask(i, j) = bern(*dropout_rng) ? 1.0 : 0.0;
      }
    }
    return dropout(t, mask, keep);
  };

  if (trace != nullptr) trace->probs.assign(layers_.size(), {});
  Tensor x = tokens;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    Tensor q = add_rowvec(matmul(x, layer.wq), layer.bq);
    Tensor k = add_rowvec(matmul(x, layer.wk), layer.bk);
    Tensor v = add_rowvec(matmul(x, layer.wv), layer.bv);
    std::vector<Matrix>* layer_trace =
        trace != nullptr ? &trace->probs[l] : nullptr;
    Tensor a = masked_multihead_attention(q, k, v, batch.observed,
                                          config_.heads, layer_trace);
    a = add_rowvec(matmul(a, layer.wo), layer.bo);
    a = maybe_dropout(a);
    // Post-norm residual, then hard-zero the lanes of missing tokens so the
    // head never sees their bias embeddings.
    x = scale_rows(layer_norm(add(x, a), layer.ln1_gamma, layer.ln1_beta),
                   lane);
    Tensor h = relu(add_rowvec(matmul(x, layer.ffn_w1), layer.ffn_b1));
    h = add_rowvec(matmul(h, layer.ffn_w2), layer.ffn_b2);
    h = maybe_dropout(h);
    x = scale_rows(layer_norm(add(x, h), layer.ln2_gamma, layer.ln2_beta),
                   lane);
  }
  return x;
}

Tensor NaimModel::classify(const Tensor& encoded, Index batch_rows) const {
  const Index flat = static_cast<Index>(schema_.size()) * config_.d_model;
  Tensor flatrows = reshape(encoded, batch_rows, flat);
  Tensor logits = add_rowvec(matmul(flatrows, head_w_), head_b_);
  return softmax_rows(logits);
}

Tensor NaimModel::forward(const NaimBatch& batch, std::mt19937_64* dropout_rng,
                          AttentionTrace* trace) const {
  Tensor tokens = embed(batch);
  Tensor encoded = encode(tokens, batch, dropout_rng, trace);
  return classify(encoded, batch.rows());
}

Tensor NaimModel::loss(const NaimBatch& batch, const std::vector<int>& labels,
                       std::mt19937_64* dropout_rng,
                       CrossEntropyDiag* diag) const {
  return cross_entropy(forward(batch, dropout_rng), labels, diag);
}

Matrix NaimModel::predict_proba(const NaimBatch& batch,
                                AttentionTrace* trace) const {
  NoGradScope guard;
  return forward(batch, nullptr, trace).value();
}

}  // namespace tabfuse
