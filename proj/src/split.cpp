#include "tabfuse/split.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "tabfuse/errors.hpp"
#include "tabfuse/rng.hpp"

namespace tabfuse {

SplitPlan stratified_kfold_split(const std::vector<int>& labels, int folds,
                                 std::uint64_t seed) {
  if (folds < 2) {
    throw ArgumentError("split: need at least 2 folds");
  }
  if (labels.empty()) {
    throw DataError("split: no rows to split");
  }
  // Class -> shuffled member indices, classes in ascending label order.
  std::map<int, std::vector<int>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    members[labels[i]].push_back(static_cast<int>(i));
  }
  for (auto& [label, rows] : members) {
    if (static_cast<int>(rows.size()) < folds) {
      throw DataError("split: class " + std::to_string(label) + " has only " +
                      std::to_string(rows.size()) + " rows for " +
                      std::to_string(folds) + " folds");
    }
    auto rng = substream(
        seed, "split-class",
        static_cast<std::uint64_t>(static_cast<long long>(label)));
    std::shuffle(rows.begin(), rows.end(), rng);
  }

  // Test assignment: deal the shuffled members round-robin over the folds,
  // with the pointer running on across classes so fold sizes stay within
  // one of each other as well as per class.
  std::map<int, std::vector<int>> fold_of;  // parallel to members[label]
  int pointer = 0;
  for (const auto& [label, rows] : members) {
    std::vector<int>& assignment = fold_of[label];
    assignment.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      assignment.push_back(pointer);
      pointer = (pointer + 1) % folds;
    }
  }

  SplitPlan plan;
  plan.folds = folds;
  plan.seed = seed;
  plan.fold_splits.resize(static_cast<std::size_t>(folds));

  for (int f = 0; f < folds; ++f) {
    FoldSplit& split = plan.fold_splits[static_cast<std::size_t>(f)];
    // Non-test rows per class, in shuffle order.
    std::map<int, std::vector<int>> rest;
    for (const auto& [label, rows] : members) {
      const std::vector<int>& assignment = fold_of[label];
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (assignment[i] == f) {
          split.test.push_back(rows[i]);
        } else {
          rest[label].push_back(rows[i]);
        }
      }
    }

    // Validation = a stratified quarter of the non-test rows
    // (largest-remainder rounding over classes).
    long rest_total = 0;
    for (const auto& [label, rows] : rest) {
      rest_total += static_cast<long>(rows.size());
    }
    const long target = std::llround(static_cast<double>(rest_total) / 4.0);
    struct Share {
      int label;
      int take;
      double frac;
    };
    std::vector<Share> shares;
    long assigned = 0;
    for (const auto& [label, rows] : rest) {
      const double exact = static_cast<double>(rows.size()) / 4.0;
      const int base = static_cast<int>(std::floor(exact));
      shares.push_back({label, base, exact - base});
      assigned += base;
    }
    std::stable_sort(
        shares.begin(), shares.end(),
        [](const Share& a, const Share& b) { return a.frac > b.frac; });
    long remaining = target - assigned;
    for (Share& s : shares) {
      if (remaining > 0 &&
          s.take < static_cast<int>(rest[s.label].size())) {
        ++s.take;
        --remaining;
      }
    }
    for (const Share& s : shares) {
      const std::vector<int>& rows = rest[s.label];
      for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
        if (i < s.take) {
          split.val.push_back(rows[static_cast<std::size_t>(i)]);
        } else {
          split.train.push_back(rows[static_cast<std::size_t>(i)]);
        }
      }
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.val.begin(), split.val.end());
    std::sort(split.test.begin(), split.test.end());
  }
  return plan;
}

}  // namespace tabfuse
