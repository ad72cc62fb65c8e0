#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tabfuse/fusion.hpp"
#include "tabfuse/naim.hpp"
#include "tabfuse/train.hpp"

namespace tabfuse {

enum class Experiment { kImaging, kClinicalBaseline, kClinicalNaim };

std::string experiment_name(Experiment e);
std::optional<Experiment> experiment_from_name(const std::string& name);

/// Command-line overrides layered over the per-experiment preset.
struct TrainOverrides {
  std::optional<double> learning_rate;
  std::optional<double> weight_decay;
  std::optional<int> max_epochs;
  std::optional<int> early_stop_patience;
  std::optional<int> plateau_patience;
  std::optional<int> batch_size;

  TrainConfig apply(TrainConfig preset) const;
};

struct RunConfig {
  std::string schema_path;
  std::string data_path;
  std::string embeddings_path;
  std::string out_dir;
  std::uint64_t seed = 42;
  int folds = 5;
  int jobs = 1;
  int knn_k = 5;
  std::vector<double> alpha_grid;  // empty = default_alpha_grid()
  NaimConfig naim;
  std::vector<int> imaging_hidden = {256, 64};
  std::vector<int> baseline_hidden = {64, 32};
  TrainOverrides overrides;
};

/// Per-fold artifacts live in <out>/<experiment>/fold<k>/: checkpoint.json,
/// train_log.csv, val_probs.csv, test_probs.csv. The experiment summary is
/// <out>/<experiment>/summary.json.
struct ExperimentResult {
  Experiment experiment = Experiment::kImaging;
  std::vector<FoldEval> fold_test_evals;
  MetricValues mean_test;
  std::vector<Matrix> test_probs;
  std::vector<std::vector<int>> test_labels;
  std::vector<std::string> log_lines;  // printed by the CLI, fold order
};

ExperimentResult run_experiment(const RunConfig& config, Experiment experiment);

/// One experiment's probability dumps read back from disk.
struct ExperimentDump {
  std::vector<Matrix> probs;
  std::vector<std::vector<int>> labels;
  std::vector<std::vector<std::string>> patient_ids;
};

/// Fusion over the dumped test probabilities. Requires complete imaging and
/// clinical-naim dumps (missing files raise MissingInputError listing every
/// gap); clinical-baseline is included in the report when present. Writes
/// <out>/report.json and <out>/report.csv.
struct FusionRunResult {
  SweepReport sweep;
  std::vector<FoldEval> imaging_folds;
  std::vector<FoldEval> naim_folds;
  std::vector<FoldEval> baseline_folds;  // empty when absent
  MetricValues imaging_mean, naim_mean, baseline_mean;
  bool has_baseline = false;
};

FusionRunResult run_fuse(const RunConfig& config);

/// The four-row summary table (per-experiment means plus the fused row at
/// the best-BA alpha), percentages with two decimals.
void print_summary(std::ostream& os, const FusionRunResult& result);

/// Re-prints the summary from a previously written <out>/report.json.
void print_report_file(std::ostream& os, const std::string& report_path);

}  // namespace tabfuse
