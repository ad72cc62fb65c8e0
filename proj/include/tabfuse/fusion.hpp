#pragma once

#include <vector>

#include "tabfuse/tensor.hpp"

namespace tabfuse {

/// Convex late fusion p = alpha * clinical + (1 - alpha) * imaging, applied
/// rowwise to Bx2 probability matrices. alpha must lie in [0, 1]; rows must
/// be valid probability vectors. alpha = 1 returns the clinical matrix
/// unchanged, alpha = 0 the imaging one.
Matrix fuse(const Matrix& clinical, const Matrix& imaging, double alpha);

/// The stock fusion grid: 0.0, 0.1, ..., 1.0 (exactly 11 points).
std::vector<double> default_alpha_grid();

struct ConfusionCounts {
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;
  long total() const { return tp + fp + tn + fn; }
};

/// Argmax decisions against 0/1 labels; the tie p0 == p1 resolves to
/// class 0.
ConfusionCounts confusion(const Matrix& probabilities,
                          const std::vector<int>& labels);

/// TPR (sensitivity), TNR (specificity), their mean (balanced accuracy) and
/// Matthews correlation. A zero denominator yields 0 with the matching
/// degeneracy flag set.
struct MetricValues {
  double tpr = 0.0;
  double tnr = 0.0;
  double ba = 0.0;
  double mcc = 0.0;
  bool tpr_degenerate = false;
  bool tnr_degenerate = false;
  bool mcc_degenerate = false;
};

MetricValues metrics(const ConfusionCounts& counts);

struct FoldEval {
  ConfusionCounts counts;
  MetricValues values;
};

FoldEval evaluate(const Matrix& probabilities, const std::vector<int>& labels);

/// Unweighted mean over folds; degeneracy flags OR together.
MetricValues cv_aggregate(const std::vector<MetricValues>& folds);

struct AlphaPoint {
  double alpha = 0.0;
  std::vector<FoldEval> folds;
  MetricValues mean;
};

struct SweepReport {
  std::vector<AlphaPoint> grid;
  double best_ba_alpha = 0.0;
  double best_mcc_alpha = 0.0;
};

/// Evaluates the fusion grid per fold and aggregates. Metric ties across
/// alphas resolve to the smaller alpha.
SweepReport alpha_sweep(const std::vector<Matrix>& clinical_probs,
                        const std::vector<Matrix>& imaging_probs,
                        const std::vector<std::vector<int>>& labels,
                        const std::vector<double>& grid);

}  // namespace tabfuse
