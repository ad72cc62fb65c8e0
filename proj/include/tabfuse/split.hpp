#pragma once

#include <cstdint>
#include <vector>

namespace tabfuse {

struct FoldSplit {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;
};

struct SplitPlan {
  int folds = 0;
  std::uint64_t seed = 0;
  std::vector<FoldSplit> fold_splits;
};

/// Stratified k-fold cross-validation plan. Every row lands in exactly one
/// test fold; class proportions carry into every test fold up to rounding;
/// fold sizes differ by at most one. Within each fold the non-test rows are
/// split 3:1 into train and validation, again stratified (largest-remainder
/// rounding). Fully determined by (labels, folds, seed); row indices in each
/// part are sorted ascending.
SplitPlan stratified_kfold_split(const std::vector<int>& labels, int folds,
                                 std::uint64_t seed);

}  // namespace tabfuse
