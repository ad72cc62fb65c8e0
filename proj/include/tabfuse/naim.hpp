#pragma once

#include <random>
#include <vector>

#include "tabfuse/dataset.hpp"
#include "tabfuse/ops.hpp"
#include "tabfuse/schema.hpp"
#include "tabfuse/tensor.hpp"

namespace tabfuse {

struct NaimConfig {
  int d_model = 32;
  int heads = 4;
  int layers = 2;
  int ffn = 64;
  double dropout = 0.1;
  int head_dim() const;  // d_model / heads, throws if not divisible
};

/// Token batch for the clinical model: per-feature codes / ranks / z-scores
/// plus the observation mask. Values at unobserved positions are
/// quarantined and never read.
struct NaimBatch {
  Matrix values;       // B x F
  BoolArray observed;  // B x F
  static NaimBatch from_dataset(const EncodedDataset& ds,
                                const std::vector<int>& rows);
  Index rows() const { return values.rows(); }
};

/// Additive attention mask for one row: 0 where both features of the pair
/// are observed, -inf where either is missing.
Matrix build_mask(const Eigen::Array<bool, Eigen::Dynamic, 1>& observed);

/// Per-layer attention probabilities, for inspection: probs[layer] holds one
/// F x F matrix per (batch row, head), row-major in that order. Rows and
/// columns touching a missing feature are exactly zero.
struct AttentionTrace {
  std::vector<std::vector<Matrix>> probs;
};

/// Multi-head scaled dot-product attention over already-projected q/k/v
/// (shape (B*F) x d_model), restricted to each row's observed features.
/// Masked-out weights are exactly zero; a row with no observed feature
/// yields zero output. Equivalent to softmax over mask-augmented scores
/// followed by zeroing the masked columns.
Tensor masked_multihead_attention(const Tensor& q, const Tensor& k,
                                  const Tensor& v, const BoolArray& observed,
                                  int heads,
                                  std::vector<Matrix>* trace = nullptr);

/// Attention-based classifier over feature tokens.
///
/// Embedding: categorical feature j maps code c to b_j + E_j[c] (missing:
/// b_j alone); numerical/ordinal feature j maps value x to b_j + x * E_j[1]
/// (missing: b_j + E_j[0]). Encoder: post-norm transformer layers whose
/// attention is restricted to observed features; after every layer the
/// lanes of missing tokens are zeroed, residual included, so the head sees
/// exact zeros at missing slots. Head: a linear map over the concatenated
/// tokens into two-class softmax probabilities.
class NaimModel {
 public:
  NaimModel(const FeatureSchema& schema, const NaimConfig& config,
            std::mt19937_64& init_rng);

  /// Graph-building forward pass (training mode when dropout_rng != nullptr).
  Tensor forward(const NaimBatch& batch, std::mt19937_64* dropout_rng = nullptr,
                 AttentionTrace* trace = nullptr) const;
  /// Mean cross-entropy over the batch, with the forward pass in training
  /// mode when dropout_rng != nullptr.
  Tensor loss(const NaimBatch& batch, const std::vector<int>& labels,
              std::mt19937_64* dropout_rng = nullptr,
              CrossEntropyDiag* diag = nullptr) const;
  /// Inference probabilities: no graph, no dropout.
  Matrix predict_proba(const NaimBatch& batch,
                       AttentionTrace* trace = nullptr) const;

  // Stages, exposed for tests: token embedding, encoder stack, head.
  Tensor embed(const NaimBatch& batch) const;
  Tensor encode(const Tensor& tokens, const NaimBatch& batch,
                std::mt19937_64* dropout_rng = nullptr,
                AttentionTrace* trace = nullptr) const;
  Tensor classify(const Tensor& encoded, Index batch_rows) const;

  const std::vector<Tensor>& parameters() const { return params_; }
  std::vector<Tensor>& parameters() { return params_; }
  const NaimConfig& config() const { return config_; }
  const FeatureSchema& schema() const { return schema_; }

 private:
  struct FeatureEmbed {
    Tensor table;  // categorical: n_categories x d; numeric-like: 2 x d
    Tensor bias;   // 1 x d
    bool numeric_like = false;
  };
  struct Layer {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln1_gamma, ln1_beta;
    Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    Tensor ln2_gamma, ln2_beta;
  };

  Tensor register_param(const std::string& name, Matrix value);

  FeatureSchema schema_;
  NaimConfig config_;
  std::vector<FeatureEmbed> embeds_;
  std::vector<Layer> layers_;
  Tensor head_w_, head_b_;
  std::vector<Tensor> params_;
};

}  // namespace tabfuse
