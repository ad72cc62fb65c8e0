#include "tabfuse/impute.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tabfuse/errors.hpp"

namespace tabfuse {

namespace {

struct FeatureSpan {
  Index col0 = 0;
  Index width = 0;
};

std::vector<FeatureSpan> feature_spans(const EncodedDataset& ds) {
  std::vector<FeatureSpan> spans(ds.schema.size());
  for (std::size_t c = 0; c < ds.expanded_columns.size(); ++c) {
    const EncodedColumn& col = ds.expanded_columns[c];
    FeatureSpan& span = spans[static_cast<std::size_t>(col.feature)];
    if (span.width == 0) span.col0 = static_cast<Index>(c);
    ++span.width;
  }
  return spans;
}

}  // namespace

void knn_impute(const EncodedDataset& ds, const std::vector<int>& train_rows,
                int k, Matrix& io, ImputeSummary* summary) {
  if (k < 1) {
    throw ArgumentError("knn_impute: k must be at least 1");
  }
  if (io.rows() != ds.expanded.rows() || io.cols() != ds.expanded.cols()) {
    throw ShapeError("knn_impute: io shape does not match the dataset");
  }
  std::vector<Index> numeric_cols;
  for (std::size_t c = 0; c < ds.expanded_columns.size(); ++c) {
    const int j = ds.expanded_columns[c].feature;
    if (ds.schema.at(static_cast<std::size_t>(j)).kind ==
        FeatureKind::kNumerical) {
      numeric_cols.push_back(static_cast<Index>(c));
    }
  }
  if (numeric_cols.empty()) return;
  const double total = static_cast<double>(numeric_cols.size());

  // Training column means of the observed z-scores (fallback values).
  std::vector<double> col_mean(numeric_cols.size(), 0.0);
  for (std::size_t ci = 0; ci < numeric_cols.size(); ++ci) {
    const Index c = numeric_cols[ci];
    double sum = 0.0;
    long count = 0;
    for (int b : train_rows) {
      if (ds.expanded_observed(b, c)) {
        sum += ds.expanded(b, c);
        ++count;
      }
    }
    col_mean[ci] = count > 0 ? sum / static_cast<double>(count) : 0.0;
  }

  for (Index r = 0; r < io.rows(); ++r) {
    bool any_missing = false;
    for (Index c : numeric_cols) {
      if (!ds.expanded_observed(r, c)) {
        any_missing = true;
        break;
      }
    }
    if (!any_missing) continue;

    // Distance to every training row, shared by all target columns of r.
    struct Candidate {
      double dist;
      int row;
    };
    std::vector<Candidate> candidates;
    candidates.reserve(train_rows.size());
    for (int b : train_rows) {
      if (static_cast<Index>(b) == r) continue;
      double sq = 0.0;
      double usable = 0.0;
      for (Index c : numeric_cols) {
        if (ds.expanded_observed(r, c) && ds.expanded_observed(b, c)) {
          const double d = ds.expanded(r, c) - ds.expanded(b, c);
          sq += d * d;
          usable += 1.0;
        }
      }
      if (usable == 0.0) continue;  // no shared column, distance undefined
      candidates.push_back({std::sqrt(sq * total / usable), b});
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const Candidate& a, const Candidate& b) {
                if (a.dist != b.dist) return a.dist < b.dist;
                return a.row < b.row;
              });

    for (std::size_t ci = 0; ci < numeric_cols.size(); ++ci) {
      const Index c = numeric_cols[ci];
      if (ds.expanded_observed(r, c)) continue;
      double sum = 0.0;
      int found = 0;
      for (const Candidate& cand : candidates) {
        if (!ds.expanded_observed(cand.row, c)) continue;
        sum += ds.expanded(cand.row, c);
        if (++found == k) break;
      }
      if (found > 0) {
        io(r, c) = sum / static_cast<double>(found);
      } else {
        io(r, c) = col_mean[ci];
        if (summary != nullptr) {
          ++summary->knn_fallbacks;
          summary->notes.push_back(
              "row " + std::to_string(r) + ", column '" +
              ds.expanded_columns[static_cast<std::size_t>(c)].name +
              "': no usable neighbor, used the training mean");
        }
      }
      if (summary != nullptr) ++summary->numeric_imputed;
    }
  }
}

void most_frequent_impute(const EncodedDataset& ds,
                          const std::vector<int>& train_rows, Matrix& io,
                          ImputeSummary* summary) {
  if (io.rows() != ds.expanded.rows() || io.cols() != ds.expanded.cols()) {
    throw ShapeError("most_frequent_impute: io shape does not match the dataset");
  }
  const std::vector<FeatureSpan> spans = feature_spans(ds);
  for (std::size_t j = 0; j < ds.schema.size(); ++j) {
    const Feature& feat = ds.schema.at(j);
    if (feat.kind == FeatureKind::kNumerical) continue;
    std::vector<long> counts(feat.categories.size(), 0);
    for (int b : train_rows) {
      if (!ds.token_observed(b, static_cast<Index>(j))) continue;
      const int code =
          static_cast<int>(std::llround(ds.token_values(b, static_cast<Index>(j))));
      ++counts[static_cast<std::size_t>(code)];
    }
    int mode = 0;
    long best = -1;
    for (std::size_t c = 0; c < counts.size(); ++c) {
      if (counts[c] > best) {
        best = counts[c];
        mode = static_cast<int>(c);
      }
    }
    if (best <= 0 && summary != nullptr) {
      ++summary->mode_fallbacks;
      summary->notes.push_back("feature '" + feat.name +
                               "' has no observed training value; imputing "
                               "the first category");
    }
    const FeatureSpan& span = spans[j];
    for (Index r = 0; r < io.rows(); ++r) {
      if (ds.token_observed(r, static_cast<Index>(j))) continue;
      if (feat.kind == FeatureKind::kCategorical) {
        for (Index c = 0; c < span.width; ++c) {
          io(r, span.col0 + c) = c == mode ? 1.0 : 0.0;
        }
      } else {
        io(r, span.col0) = static_cast<double>(mode);
      }
      if (summary != nullptr) ++summary->categorical_imputed;
    }
  }
}

Matrix impute_baseline(const EncodedDataset& ds,
                       const std::vector<int>& train_rows, int k,
                       ImputeSummary* summary) {
  Matrix io = ds.expanded;
  most_frequent_impute(ds, train_rows, io, summary);
  knn_impute(ds, train_rows, k, io, summary);
  if (!io.allFinite()) {
    throw DataError("impute_baseline: imputed matrix is not finite");
  }
  return io;
}

}  // namespace tabfuse
