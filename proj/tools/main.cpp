#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tabfuse/errors.hpp"
#include "tabfuse/pipeline.hpp"
#include "tabfuse/synth.hpp"

namespace {

int run(int argc, char** argv) {
  CLI::App app{"tabfuse: missing-aware tabular fusion pipeline"};
  app.set_config("--config", "", "Key-value config file; command-line flags win");
  app.require_subcommand(1);

  tabfuse::SynthConfig synth;
  std::string generate_out;
  std::string missing_mode = "mcar";
  auto* generate = app.add_subcommand(
      "generate", "Write a synthetic cohort (schema, data, embeddings)");
  generate->add_option("--out", generate_out, "Output directory")->required();
  generate->add_option("--rows", synth.rows, "Cohort size");
  generate->add_option("--missing-rate", synth.missing_rate,
                       "Per-cell missing probability");
  generate->add_option("--missing-mode", missing_mode, "mcar or label")
      ->check(CLI::IsMember({"mcar", "label"}));
  generate->add_option("--missing-delta", synth.missing_delta,
                       "Rate shift by label in label mode");
  generate->add_option("--embedding-dim", synth.embedding_dim,
                       "Imaging embedding width");
  generate->add_option("--intercept", synth.intercept,
                       "Planted logit intercept");
  generate->add_option("--imaging-signal", synth.imaging_signal,
                       "Planted-logit weight inside the embeddings");
  generate->add_option("--imaging-noise", synth.imaging_noise,
                       "Per-patient noise on the embedded signal");
  generate->add_option("--background-noise", synth.background_noise,
                       "Elementwise embedding noise");
  generate->add_option("--seed", synth.seed, "RNG seed");

  tabfuse::RunConfig run_config;
  std::string experiment_name;
  auto* train = app.add_subcommand(
      "train", "Train one experiment across the cross-validation folds");
  train->add_option("--schema", run_config.schema_path, "Schema CSV")
      ->required();
  train->add_option("--data", run_config.data_path, "Data CSV")->required();
  train->add_option("--embeddings", run_config.embeddings_path,
                    "Embedding CSV (imaging experiment)");
  train->add_option("--out", run_config.out_dir, "Output directory")
      ->required();
  train
      ->add_option("--experiment", experiment_name,
                   "imaging, clinical-baseline or clinical-naim")
      ->required()
      ->check(CLI::IsMember({"imaging", "clinical-baseline", "clinical-naim"}));
  train->add_option("--seed", run_config.seed, "RNG seed");
  train->add_option("--folds", run_config.folds, "Cross-validation folds");
  train->add_option("--jobs", run_config.jobs, "Parallel fold workers");
  train->add_option("--knn-k", run_config.knn_k, "Imputation neighbors");
  train->add_option("--learning-rate", run_config.overrides.learning_rate,
                    "Override the preset learning rate");
  train->add_option("--weight-decay", run_config.overrides.weight_decay,
                    "Override the preset weight decay");
  train->add_option("--max-epochs", run_config.overrides.max_epochs,
                    "Override the preset epoch cap");
  train->add_option("--patience", run_config.overrides.early_stop_patience,
                    "Override the early-stopping patience");
  train->add_option("--plateau-patience",
                    run_config.overrides.plateau_patience,
                    "Override the plateau patience");
  train->add_option("--batch-size", run_config.overrides.batch_size,
                    "Mini-batch size (0 = full batch)");
  train->add_option("--d-model", run_config.naim.d_model,
                    "Attention model width");
  train->add_option("--heads", run_config.naim.heads, "Attention heads");
  train->add_option("--layers", run_config.naim.layers, "Encoder layers");
  train->add_option("--ffn", run_config.naim.ffn, "Feed-forward width");
  train->add_option("--dropout", run_config.naim.dropout, "Dropout rate");
  train->add_option("--imaging-hidden", run_config.imaging_hidden,
                    "Imaging MLP hidden widths")
      ->delimiter(',');
  train->add_option("--baseline-hidden", run_config.baseline_hidden,
                    "Baseline MLP hidden widths")
      ->delimiter(',');

  auto* fuse = app.add_subcommand(
      "fuse", "Fuse dumped probabilities and write the report");
  fuse->add_option("--out", run_config.out_dir,
                   "Directory holding the experiment dumps")
      ->required();
  fuse->add_option("--alpha-grid", run_config.alpha_grid,
                   "Fusion weights, e.g. 0,0.5,1")
      ->delimiter(',');
  fuse->add_option("--folds", run_config.folds, "Cross-validation folds");
  fuse->add_option("--seed", run_config.seed, "Seed recorded in the report");

  auto* report =
      app.add_subcommand("report", "Print the summary table from report.json");
  report->add_option("--out", run_config.out_dir,
                     "Directory holding report.json")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (generate->parsed()) {
    synth.missing_mode = missing_mode == "label"
                             ? tabfuse::MissingMode::kLabelDependent
                             : tabfuse::MissingMode::kMcar;
    const tabfuse::SynthResult result = tabfuse::synth_generate(synth);
    std::filesystem::create_directories(generate_out);
    tabfuse::write_synth_files(result, generate_out + "/schema.csv",
                               generate_out + "/data.csv",
                               generate_out + "/embeddings.csv");
    char line[160];
    std::snprintf(line, sizeof(line),
                  "generated %d rows: prevalence %.4f, observed fraction %.4f",
                  synth.rows, result.prevalence, result.observed_fraction);
    std::cout << line << '\n'
              << "wrote " << generate_out << "/schema.csv, data.csv, "
              << "embeddings.csv\n";
    return 0;
  }
  if (train->parsed()) {
    const auto experiment = tabfuse::experiment_from_name(experiment_name);
    std::filesystem::create_directories(run_config.out_dir);
    const tabfuse::ExperimentResult result =
        tabfuse::run_experiment(run_config, *experiment);
    for (const std::string& line : result.log_lines) {
      std::cout << line << '\n';
    }
    char line[160];
    std::snprintf(line, sizeof(line),
                  "[%s] mean test: TNR %.4f TPR %.4f BA %.4f MCC %.4f",
                  experiment_name.c_str(), result.mean_test.tnr,
                  result.mean_test.tpr, result.mean_test.ba,
                  result.mean_test.mcc);
    std::cout << line << '\n';
    return 0;
  }
  if (fuse->parsed()) {
    const tabfuse::FusionRunResult result = tabfuse::run_fuse(run_config);
    tabfuse::print_summary(std::cout, result);
    std::cout << "wrote " << run_config.out_dir << "/report.json and "
              << "report.csv\n";
    return 0;
  }
  if (report->parsed()) {
    tabfuse::print_report_file(std::cout,
                               run_config.out_dir + "/report.json");
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const tabfuse::ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const tabfuse::MissingInputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const tabfuse::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
}
