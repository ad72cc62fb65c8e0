#pragma once

#include <string>
#include <vector>

#include "tabfuse/dataset.hpp"

namespace tabfuse {

struct ImputeSummary {
  int numeric_imputed = 0;
  int categorical_imputed = 0;
  int knn_fallbacks = 0;   // column-mean substitutions (no usable neighbor)
  int mode_fallbacks = 0;  // first-category substitutions (nothing observed)
  std::vector<std::string> notes;
};

/// Fills the missing z-scored numerical cells of `io` (expanded layout,
/// same shape as ds.expanded) from the k nearest training rows.
///
/// Distances are Euclidean over the mutually observed numerical columns,
/// rescaled by total/usable column count so rows with few shared columns
/// are not artificially close; distance ties break toward the lower row
/// index. A cell with no observed neighbor falls back to the training
/// column mean.
void knn_impute(const EncodedDataset& ds, const std::vector<int>& train_rows,
                int k, Matrix& io, ImputeSummary* summary = nullptr);

/// Fills the missing categorical one-hot blocks and ordinal rank columns of
/// `io` with the most frequent training value; frequency ties break toward
/// the earlier schema category.
void most_frequent_impute(const EncodedDataset& ds,
                          const std::vector<int>& train_rows, Matrix& io,
                          ImputeSummary* summary = nullptr);

/// Fully imputed copy of ds.expanded: kNN for numericals, most-frequent for
/// the rest. Every row is completed; statistics come from train_rows only.
Matrix impute_baseline(const EncodedDataset& ds,
                       const std::vector<int>& train_rows, int k,
                       ImputeSummary* summary = nullptr);

}  // namespace tabfuse
