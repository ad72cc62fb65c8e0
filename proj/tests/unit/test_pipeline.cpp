#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "tabfuse/csv.hpp"
#include "tabfuse/errors.hpp"
#include "tabfuse/pipeline.hpp"
#include "tabfuse/synth.hpp"

using namespace tabfuse;
namespace fs = std::filesystem;

namespace {
// One small cohort shared by the whole suite (generation is cheap, training
// is the slow part, so keep the dimensions minimal).
struct Cohort {
  testutil::TempDir dir{"pipeline"};
  RunConfig config;

  Cohort() {
    SynthConfig synth;
    synth.rows = 60;
    synth.missing_rate = 0.2;
    synth.embedding_dim = 6;
    synth.seed = 77;
    const SynthResult result = synth_generate(synth);
    write_synth_files(result, dir.path() + "/schema.csv",
                      dir.path() + "/data.csv", dir.path() + "/embeddings.csv");

    config.schema_path = dir.path() + "/schema.csv";
    config.data_path = dir.path() + "/data.csv";
    config.embeddings_path = dir.path() + "/embeddings.csv";
    config.out_dir = dir.path() + "/out";
    config.seed = 7;
    config.folds = 3;
    config.knn_k = 3;
    config.naim.d_model = 8;
    config.naim.heads = 2;
    config.naim.layers = 1;
    config.naim.ffn = 12;
    config.naim.dropout = 0.1;
    config.imaging_hidden = {8};
    config.baseline_hidden = {8};
    config.overrides.max_epochs = 12;
    config.overrides.early_stop_patience = 0;
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}
}  // namespace

TEST_CASE("the full pipeline trains, fuses and reports") {
  Cohort cohort;
  const RunConfig& cfg = cohort.config;

  const ExperimentResult imaging = run_experiment(cfg, Experiment::kImaging);
  const ExperimentResult baseline =
      run_experiment(cfg, Experiment::kClinicalBaseline);
  const ExperimentResult naim = run_experiment(cfg, Experiment::kClinicalNaim);

  REQUIRE(imaging.fold_test_evals.size() == 3);
  REQUIRE(naim.fold_test_evals.size() == 3);
  CHECK(imaging.log_lines.size() == 3);

  for (const std::string& exp :
       {std::string("imaging"), std::string("clinical-baseline"),
        std::string("clinical-naim")}) {
    for (int f = 0; f < 3; ++f) {
      const std::string fold =
          cfg.out_dir + "/" + exp + "/fold" + std::to_string(f);
      CHECK(fs::exists(fold + "/checkpoint.json"));
      CHECK(fs::exists(fold + "/train_log.csv"));
      CHECK(fs::exists(fold + "/val_probs.csv"));
      CHECK(fs::exists(fold + "/test_probs.csv"));
    }
    CHECK(fs::exists(cfg.out_dir + "/" + exp + "/summary.json"));
  }

  // The probability dumps carry the standard header and one row per test
  // patient; every test row of fold 0 appears exactly once.
  const CsvTable probs =
      read_csv(cfg.out_dir + "/imaging/fold0/test_probs.csv");
  CHECK(probs.header ==
        std::vector<std::string>{"patient_id", "label", "p0", "p1"});
  CHECK(probs.rows.size() == 20);  // 60 rows / 3 folds

  // summary.json mean metrics agree with the in-memory result.
  const nlohmann::json summary = nlohmann::json::parse(
      slurp(cfg.out_dir + "/clinical-naim/summary.json"));
  CHECK(summary.at("experiment") == "clinical-naim");
  CHECK(summary.at("folds") == 3);
  CHECK(summary.at("mean").at("ba").get<double>() ==
        doctest::Approx(naim.mean_test.ba).epsilon(1e-12));

  // Fusion over the dumps, then the report files.
  const FusionRunResult fused = run_fuse(cfg);
  CHECK(fused.has_baseline);
  REQUIRE(fused.sweep.grid.size() == 11);
  CHECK(fs::exists(cfg.out_dir + "/report.json"));
  CHECK(fs::exists(cfg.out_dir + "/report.csv"));

  // Endpoint grid rows equal the unimodal evaluations.
  const AlphaPoint& alpha0 = fused.sweep.grid.front();
  const AlphaPoint& alpha1 = fused.sweep.grid.back();
  REQUIRE(alpha0.alpha == 0.0);
  REQUIRE(alpha1.alpha == 1.0);
  for (int f = 0; f < 3; ++f) {
    CHECK(alpha0.folds[f].values.ba == fused.imaging_folds[f].values.ba);
    CHECK(alpha0.folds[f].counts.tp == fused.imaging_folds[f].counts.tp);
    CHECK(alpha1.folds[f].values.ba == fused.naim_folds[f].values.ba);
    CHECK(alpha1.folds[f].counts.tp == fused.naim_folds[f].counts.tp);
  }

  // The printed summary carries all four rows in metric order.
  std::ostringstream table;
  print_summary(table, fused);
  const std::string text = table.str();
  CHECK(text.find("imaging") != std::string::npos);
  CHECK(text.find("clinical-baseline") != std::string::npos);
  CHECK(text.find("clinical-naim") != std::string::npos);
  CHECK(text.find("multimodal (alpha=") != std::string::npos);
  CHECK(text.find("TNR") < text.find("TPR"));
  CHECK(text.find("TPR") < text.find("BA"));
  CHECK(text.find("BA") < text.find("MCC"));

  // report re-print works from the file alone.
  std::ostringstream reprint;
  print_report_file(reprint, cfg.out_dir + "/report.json");
  CHECK(reprint.str().find("multimodal") != std::string::npos);

  // report.csv: fusion rows for each grid point plus per-experiment rows.
  const CsvTable report = read_csv(cfg.out_dir + "/report.csv");
  CHECK(report.header ==
        std::vector<std::string>{"experiment", "alpha", "fold", "tp", "fp",
                                 "tn", "fn", "tpr", "tnr", "ba", "mcc"});
  long fusion_rows = 0;
  for (const auto& row : report.rows) fusion_rows += row[0] == "fusion";
  CHECK(fusion_rows == 11 * (3 + 1));  // 3 folds + mean per grid point
}

TEST_CASE("two sequential runs are byte-identical, as is a threaded one") {
  Cohort first;
  first.config.out_dir = first.dir.path() + "/out1";
  const ExperimentResult r1 = run_experiment(first.config, Experiment::kImaging);

  first.config.out_dir = first.dir.path() + "/out2";
  const ExperimentResult r2 = run_experiment(first.config, Experiment::kImaging);

  first.config.out_dir = first.dir.path() + "/out3";
  first.config.jobs = 3;
  const ExperimentResult r3 = run_experiment(first.config, Experiment::kImaging);

  for (int f = 0; f < 3; ++f) {
    const std::string rel = "/imaging/fold" + std::to_string(f);
    for (const std::string& file :
         {std::string("/checkpoint.json"), std::string("/train_log.csv"),
          std::string("/val_probs.csv"), std::string("/test_probs.csv")}) {
      const std::string a = slurp(first.dir.path() + "/out1" + rel + file);
      CHECK(!a.empty());
      CHECK(a == slurp(first.dir.path() + "/out2" + rel + file));
      CHECK(a == slurp(first.dir.path() + "/out3" + rel + file));
    }
  }
  CHECK(slurp(first.dir.path() + "/out1/imaging/summary.json") ==
        slurp(first.dir.path() + "/out3/imaging/summary.json"));
  CHECK(r1.mean_test.ba == r2.mean_test.ba);
  CHECK(r1.mean_test.ba == r3.mean_test.ba);
  CHECK(r1.log_lines == r3.log_lines);
}

TEST_CASE("fusing before training reports every missing dump") {
  Cohort cohort;
  cohort.config.out_dir = cohort.dir.path() + "/never-trained";
  try {
    (void)run_fuse(cohort.config);
    FAIL("expected MissingInputError");
  } catch (const MissingInputError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("imaging") != std::string::npos);
    CHECK(msg.find("clinical-naim") != std::string::npos);
    CHECK(msg.find("test_probs.csv") != std::string::npos);
  }
}

TEST_CASE("experiment names round-trip") {
  CHECK(experiment_name(Experiment::kImaging) == "imaging");
  CHECK(experiment_name(Experiment::kClinicalBaseline) == "clinical-baseline");
  CHECK(experiment_name(Experiment::kClinicalNaim) == "clinical-naim");
  CHECK(experiment_from_name("imaging") == Experiment::kImaging);
  CHECK(experiment_from_name("clinical-naim") == Experiment::kClinicalNaim);
  CHECK_FALSE(experiment_from_name("unknown").has_value());
}

TEST_CASE("overrides layer on top of the presets") {
  TrainOverrides ov;
  ov.learning_rate = 0.5;
  ov.max_epochs = 9;
  const TrainConfig cfg = ov.apply(TrainConfig::naim_preset());
  CHECK(cfg.learning_rate == 0.5);
  CHECK(cfg.max_epochs == 9);
  CHECK(cfg.plateau_patience == 25);  // untouched preset field
  CHECK(cfg.early_stop_patience == 100);
}

TEST_CASE("a missing data file fails with the path in the message") {
  Cohort cohort;
  cohort.config.data_path = cohort.dir.path() + "/nonexistent.csv";
  try {
    (void)run_experiment(cohort.config, Experiment::kClinicalNaim);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("nonexistent.csv") != std::string::npos);
  }
}

TEST_CASE("imaging requires an embeddings file") {
  Cohort cohort;
  cohort.config.embeddings_path = "";
  CHECK_THROWS_AS(run_experiment(cohort.config, Experiment::kImaging),
                  ArgumentError);
  // The clinical experiments run fine without one (cheap config).
  cohort.config.overrides.max_epochs = 1;
  const ExperimentResult r =
      run_experiment(cohort.config, Experiment::kClinicalBaseline);
  CHECK(r.fold_test_evals.size() == 3);
}
