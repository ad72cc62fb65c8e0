#include "tabfuse/fusion.hpp"

#include <cmath>

#include "tabfuse/errors.hpp"

namespace tabfuse {

namespace {

void check_probability_matrix(const Matrix& p, const char* which) {
  if (p.cols() != 2) {
    throw ArgumentError(std::string("fuse: ") + which +
                        " matrix must have two columns");
  }
  for (Index r = 0; r < p.rows(); ++r) {
    const double a = p(r, 0);
    const double b = p(r, 1);
    if (!(a >= 0.0) || !(b >= 0.0) || std::abs(a + b - 1.0) > 1e-9) {
      throw ArgumentError(std::string("fuse: ") + which + " row " +
                          std::to_string(r) +
                          " is not a probability vector");
    }
  }
}

}  // namespace

Matrix fuse(const Matrix& clinical, const Matrix& imaging, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ArgumentError("fuse: alpha must lie in [0, 1]");
  }
  if (clinical.rows() != imaging.rows()) {
    throw ArgumentError("fuse: fold sizes differ (" +
                        std::to_string(clinical.rows()) + " vs " +
                        std::to_string(imaging.rows()) + ")");
  }
  check_probability_matrix(clinical, "clinical");
  check_probability_matrix(imaging, "imaging");
  if (alpha == 1.0) return clinical;
  if (alpha == 0.0) return imaging;
  return alpha * clinical + (1.0 - alpha) * imaging;
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back(static_cast<double>(i) / 10.0);
  return grid;
}

ConfusionCounts confusion(const Matrix& probabilities,
                          const std::vector<int>& labels) {
  if (probabilities.rows() != static_cast<Index>(labels.size())) {
    throw ArgumentError("confusion: " + std::to_string(probabilities.rows()) +
                        " probability rows vs " +
                        std::to_string(labels.size()) + " labels");
  }
  if (probabilities.cols() != 2) {
    throw ArgumentError("confusion: probability matrix must have two columns");
  }
  ConfusionCounts c;
  for (Index r = 0; r < probabilities.rows(); ++r) {
    const int label = labels[static_cast<std::size_t>(r)];
    if (label != 0 && label != 1) {
      throw ArgumentError("confusion: label " + std::to_string(label) +
                          " is not 0/1");
    }
    const int pred = probabilities(r, 1) > probabilities(r, 0) ? 1 : 0;
    if (label == 1) {
      pred == 1 ? ++c.tp : ++c.fn;
    } else {
      pred == 0 ? ++c.tn : ++c.fp;
    }
  }
  return c;
}

MetricValues metrics(const ConfusionCounts& c) {
  MetricValues m;
  if (c.tp + c.fn > 0) {
    m.tpr = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  } else {
    m.tpr_degenerate = true;
  }
  if (c.tn + c.fp > 0) {
    m.tnr = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  } else {
    m.tnr_degenerate = true;
  }
  m.ba = (m.tpr + m.tnr) / 2.0;
  const double denom = static_cast<double>(c.tp + c.fp) *
                       static_cast<double>(c.tp + c.fn) *
                       static_cast<double>(c.tn + c.fp) *
                       static_cast<double>(c.tn + c.fn);
  if (denom > 0.0) {
    m.mcc = (static_cast<double>(c.tp) * static_cast<double>(c.tn) -
             static_cast<double>(c.fp) * static_cast<double>(c.fn)) /
            std::sqrt(denom);
  } else {
    m.mcc_degenerate = true;
  }
  return m;
}

FoldEval evaluate(const Matrix& probabilities, const std::vector<int>& labels) {
  FoldEval e;
  e.counts = confusion(probabilities, labels);
  e.values = metrics(e.counts);
  return e;
}

MetricValues cv_aggregate(const std::vector<MetricValues>& folds) {
  if (folds.empty()) {
    throw ArgumentError("cv_aggregate: no folds");
  }
  MetricValues mean;
  for (const MetricValues& f : folds) {
    mean.tpr += f.tpr;
    mean.tnr += f.tnr;
    mean.ba += f.ba;
    mean.mcc += f.mcc;
    mean.tpr_degenerate = mean.tpr_degenerate || f.tpr_degenerate;
    mean.tnr_degenerate = mean.tnr_degenerate || f.tnr_degenerate;
    mean.mcc_degenerate = mean.mcc_degenerate || f.mcc_degenerate;
  }
  const double n = static_cast<double>(folds.size());
  mean.tpr /= n;
  mean.tnr /= n;
  mean.ba /= n;
  mean.mcc /= n;
  return mean;
}

SweepReport alpha_sweep(const std::vector<Matrix>& clinical_probs,
                        const std::vector<Matrix>& imaging_probs,
                        const std::vector<std::vector<int>>& labels,
                        const std::vector<double>& grid) {
  if (clinical_probs.size() != imaging_probs.size() ||
      clinical_probs.size() != labels.size() || clinical_probs.empty()) {
    throw ArgumentError("alpha_sweep: fold lists differ in length");
  }
  if (grid.empty()) {
    throw ArgumentError("alpha_sweep: empty alpha grid");
  }
  SweepReport report;
  for (double alpha : grid) {
    AlphaPoint point;
    point.alpha = alpha;
    std::vector<MetricValues> per_fold;
    for (std::size_t f = 0; f < clinical_probs.size(); ++f) {
      const Matrix fused = fuse(clinical_probs[f], imaging_probs[f], alpha);
      point.folds.push_back(evaluate(fused, labels[f]));
      per_fold.push_back(point.folds.back().values);
    }
    point.mean = cv_aggregate(per_fold);
    report.grid.push_back(std::move(point));
  }
  // Ties resolve toward the smaller alpha, whatever the grid order.
  const AlphaPoint* best_ba = &report.grid.front();
  const AlphaPoint* best_mcc = &report.grid.front();
  for (const AlphaPoint& p : report.grid) {
    if (p.mean.ba > best_ba->mean.ba ||
        (p.mean.ba == best_ba->mean.ba && p.alpha < best_ba->alpha)) {
      best_ba = &p;
    }
    if (p.mean.mcc > best_mcc->mean.mcc ||
        (p.mean.mcc == best_mcc->mean.mcc && p.alpha < best_mcc->alpha)) {
      best_mcc = &p;
    }
  }
  report.best_ba_alpha = best_ba->alpha;
  report.best_mcc_alpha = best_mcc->alpha;
  return report;
}

}  // namespace tabfuse
