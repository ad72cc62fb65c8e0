#include "tabfuse/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "tabfuse/checkpoint.hpp"
#include "tabfuse/csv.hpp"
#include "tabfuse/errors.hpp"
#include "tabfuse/impute.hpp"
#include "tabfuse/mlp.hpp"
#include "tabfuse/rng.hpp"
#include "tabfuse/split.hpp"

namespace tabfuse {

namespace fs = std::filesystem;
using nlohmann::json;

std::string experiment_name(Experiment e) {
  switch (e) {
    case Experiment::kImaging:
      return "imaging";
    case Experiment::kClinicalBaseline:
      return "clinical-baseline";
    case Experiment::kClinicalNaim:
      return "clinical-naim";
  }
  throw ArgumentError("unknown experiment");
}

std::optional<Experiment> experiment_from_name(const std::string& name) {
  if (name == "imaging") return Experiment::kImaging;
  if (name == "clinical-baseline") return Experiment::kClinicalBaseline;
  if (name == "clinical-naim") return Experiment::kClinicalNaim;
  return std::nullopt;
}

TrainConfig TrainOverrides::apply(TrainConfig preset) const {
  if (learning_rate) preset.learning_rate = *learning_rate;
  if (weight_decay) preset.weight_decay = *weight_decay;
  if (max_epochs) preset.max_epochs = *max_epochs;
  if (early_stop_patience) preset.early_stop_patience = *early_stop_patience;
  if (plateau_patience) preset.plateau_patience = *plateau_patience;
  if (batch_size) preset.batch_size = *batch_size;
  return preset;
}

namespace {

std::string fold_dir(const RunConfig& config, Experiment e, int fold) {
  return config.out_dir + "/" + experiment_name(e) + "/fold" +
         std::to_string(fold);
}

void write_probs_csv(const std::string& path,
                     const std::vector<std::string>& ids,
                     const std::vector<int>& labels, const Matrix& probs) {
  CsvTable table;
  table.header = {"patient_id", "label", "p0", "p1"};
  for (Index r = 0; r < probs.rows(); ++r) {
    table.rows.push_back({ids[static_cast<std::size_t>(r)],
                          labels[static_cast<std::size_t>(r)] == 1 ? "1" : "0",
                          format_double(probs(r, 0)),
                          format_double(probs(r, 1))});
  }
  write_csv(path, table);
}

struct ProbsFile {
  std::vector<std::string> ids;
  std::vector<int> labels;
  Matrix probs;
};

ProbsFile read_probs_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  if (table.header != std::vector<std::string>{"patient_id", "label", "p0",
                                               "p1"}) {
    throw DataError(path + ": expected header patient_id,label,p0,p1");
  }
  ProbsFile out;
  out.probs.resize(static_cast<Index>(table.rows.size()), 2);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    out.ids.push_back(row[0]);
    if (row[1] != "0" && row[1] != "1") {
      throw DataError(path + ": row " + std::to_string(r + 1) +
                      ": label must be 0/1");
    }
    out.labels.push_back(row[1] == "1" ? 1 : 0);
    double p0 = 0.0, p1 = 0.0;
    if (!parse_double(row[2], p0) || !parse_double(row[3], p1) ||
        !std::isfinite(p0) || !std::isfinite(p1)) {
      throw DataError(path + ": row " + std::to_string(r + 1) +
                      ": unparsable probability");
    }
    out.probs(static_cast<Index>(r), 0) = p0;
    out.probs(static_cast<Index>(r), 1) = p1;
  }
  return out;
}

Matrix load_embeddings(const std::string& path,
                       const std::vector<std::string>& ids) {
  const CsvTable table = read_csv(path);
  if (table.header.empty() || table.header[0] != "patient_id" ||
      table.header.size() < 2) {
    throw DataError(path + ": expected patient_id plus embedding columns");
  }
  const Index width = static_cast<Index>(table.header.size()) - 1;
  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    row_of[table.rows[r][0]] = r;
  }
  Matrix out(static_cast<Index>(ids.size()), width);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto it = row_of.find(ids[i]);
    if (it == row_of.end()) {
      throw DataError(path + ": no embedding for patient '" + ids[i] + "'");
    }
    const auto& row = table.rows[it->second];
    for (Index j = 0; j < width; ++j) {
      double v = 0.0;
      if (!parse_double(row[static_cast<std::size_t>(j) + 1], v) ||
          !std::isfinite(v)) {
        throw DataError(path + ": patient '" + ids[i] +
                        "': unparsable embedding value");
      }
      out(static_cast<Index>(i), j) = v;
    }
  }
  return out;
}

json metrics_json(const MetricValues& m) {
  return {{"tpr", m.tpr},
          {"tnr", m.tnr},
          {"ba", m.ba},
          {"mcc", m.mcc},
          {"tpr_degenerate", m.tpr_degenerate},
          {"tnr_degenerate", m.tnr_degenerate},
          {"mcc_degenerate", m.mcc_degenerate}};
}

json fold_eval_json(const FoldEval& e) {
  json j = metrics_json(e.values);
  j["tp"] = e.counts.tp;
  j["fp"] = e.counts.fp;
  j["tn"] = e.counts.tn;
  j["fn"] = e.counts.fn;
  return j;
}

MetricValues metrics_from_json(const json& j) {
  MetricValues m;
  m.tpr = j.at("tpr").get<double>();
  m.tnr = j.at("tnr").get<double>();
  m.ba = j.at("ba").get<double>();
  m.mcc = j.at("mcc").get<double>();
  return m;
}

void write_json_file(const std::string& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot write file: " + path);
  }
  out << doc.dump(2) << '\n';
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v * 100.0);
  return buf;
}

}  // namespace

ExperimentResult run_experiment(const RunConfig& config,
                                Experiment experiment) {
  if (config.folds < 2) {
    throw ArgumentError("train: need at least 2 folds");
  }
  if (config.jobs < 1) {
    throw ArgumentError("train: jobs must be at least 1");
  }
  if (config.knn_k < 1) {
    throw ArgumentError("train: knn k must be at least 1");
  }
  const FeatureSchema schema = FeatureSchema::from_csv(config.schema_path);
  const RawDataset raw = load_csv(config.data_path, schema);
  if (!raw.has_labels()) {
    throw DataError(config.data_path + ": training requires a label column");
  }
  Matrix embeddings;
  if (experiment == Experiment::kImaging) {
    if (config.embeddings_path.empty()) {
      throw ArgumentError("train: the imaging experiment needs --embeddings");
    }
    embeddings = load_embeddings(config.embeddings_path, raw.patient_ids);
  }
  const SplitPlan plan =
      stratified_kfold_split(raw.labels, config.folds, config.seed);

  TrainConfig preset;
  switch (experiment) {
    case Experiment::kImaging:
      preset = TrainConfig::imaging_preset();
      break;
    case Experiment::kClinicalBaseline:
      preset = TrainConfig::clinical_baseline_preset();
      break;
    case Experiment::kClinicalNaim:
      preset = TrainConfig::naim_preset();
      break;
  }
  const TrainConfig train_cfg = config.overrides.apply(preset);
  const std::string exp_name = experiment_name(experiment);
  const std::uint64_t schema_hash = schema.hash();

  for (int f = 0; f < config.folds; ++f) {
    fs::create_directories(fold_dir(config, experiment, f));
  }

  struct FoldOut {
    FoldEval eval;
    Matrix test_probs;
    std::vector<int> test_labels;
    std::vector<std::string> lines;
    TrainResult train;
  };
  std::vector<FoldOut> outs(static_cast<std::size_t>(config.folds));
  std::vector<std::exception_ptr> errors(
      static_cast<std::size_t>(config.folds));

  auto run_fold = [&](int f) {
    const FoldSplit& split = plan.fold_splits[static_cast<std::size_t>(f)];
    const std::string dir = fold_dir(config, experiment, f);
    FoldOut& out = outs[static_cast<std::size_t>(f)];

    const std::vector<int> ytr = detail::subset_rows(raw.labels, split.train);
    const std::vector<int> yva = detail::subset_rows(raw.labels, split.val);
    const std::vector<int> yte = detail::subset_rows(raw.labels, split.test);
    std::vector<std::string> val_ids, test_ids;
    for (int r : split.val) {
      val_ids.push_back(raw.patient_ids[static_cast<std::size_t>(r)]);
    }
    for (int r : split.test) {
      test_ids.push_back(raw.patient_ids[static_cast<std::size_t>(r)]);
    }

    auto init_rng = substream(config.seed, "init-" + exp_name,
                              static_cast<std::uint64_t>(f));
    TrainStreams streams = make_train_streams(config.seed, exp_name, f);
    Matrix val_probs, test_probs;

    if (experiment == Experiment::kClinicalNaim) {
      const EncodedDataset enc = encode(raw, split.train);
      const NaimBatch btr = NaimBatch::from_dataset(enc, split.train);
      const NaimBatch bva = NaimBatch::from_dataset(enc, split.val);
      const NaimBatch bte = NaimBatch::from_dataset(enc, split.test);
      NaimModel model(schema, config.naim, init_rng);
      out.train = train_model(model, btr, ytr, bva, yva, train_cfg, streams);
      val_probs = model.predict_proba(bva);
      test_probs = model.predict_proba(bte);
      save_checkpoint(dir + "/checkpoint.json", model, schema_hash);
    } else {
      Matrix x;
      MlpConfig mcfg;
      if (experiment == Experiment::kImaging) {
        x = embeddings;
        mcfg = MlpConfig{static_cast<int>(x.cols()), config.imaging_hidden, 2};
      } else {
        const EncodedDataset enc = encode(raw, split.train);
        ImputeSummary summary;
        x = impute_baseline(enc, split.train, config.knn_k, &summary);
        mcfg = MlpConfig{static_cast<int>(x.cols()), config.baseline_hidden, 2};
        out.lines.push_back(
            "[" + exp_name + "] fold " + std::to_string(f) + ": imputed " +
            std::to_string(summary.numeric_imputed) + " numerical and " +
            std::to_string(summary.categorical_imputed) +
            " categorical cells (" +
            std::to_string(summary.knn_fallbacks + summary.mode_fallbacks) +
            " fallbacks)");
      }
      const Matrix xtr = detail::subset_batch(x, split.train);
      const Matrix xva = detail::subset_batch(x, split.val);
      const Matrix xte = detail::subset_batch(x, split.test);
      MlpModel model(mcfg, init_rng);
      out.train = train_model(model, xtr, ytr, xva, yva, train_cfg, streams);
      val_probs = model.predict_proba(xva);
      test_probs = model.predict_proba(xte);
      save_checkpoint(dir + "/checkpoint.json", model, schema_hash);
    }

    write_train_log(dir + "/train_log.csv", out.train);
    write_probs_csv(dir + "/val_probs.csv", val_ids, yva, val_probs);
    write_probs_csv(dir + "/test_probs.csv", test_ids, yte, test_probs);
    out.eval = evaluate(test_probs, yte);
    out.test_probs = test_probs;
    out.test_labels = yte;
    char ba[32];
    std::snprintf(ba, sizeof(ba), "%.4f", out.eval.values.ba);
    out.lines.push_back("[" + exp_name + "] fold " + std::to_string(f) +
                        ": best epoch " + std::to_string(out.train.best_epoch) +
                        "/" + std::to_string(out.train.epochs_run) +
                        ", test BA " + ba +
                        (out.train.abort_reason.empty()
                             ? ""
                             : " (aborted: " + out.train.abort_reason + ")"));
  };

  const int jobs = std::min(config.jobs, config.folds);
  if (jobs <= 1) {
    for (int f = 0; f < config.folds; ++f) {
      try {
        run_fold(f);
      } catch (...) {
        errors[static_cast<std::size_t>(f)] = std::current_exception();
        break;
      }
    }
  } else {
    std::atomic<int> next{0};
    auto worker = [&]() {
      while (true) {
        const int f = next.fetch_add(1);
        if (f >= config.folds) break;
        try {
          run_fold(f);
        } catch (...) {
          errors[static_cast<std::size_t>(f)] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ExperimentResult result;
  result.experiment = experiment;
  std::vector<MetricValues> fold_values;
  json fold_json = json::array();
  for (int f = 0; f < config.folds; ++f) {
    const FoldOut& out = outs[static_cast<std::size_t>(f)];
    result.fold_test_evals.push_back(out.eval);
    result.test_probs.push_back(out.test_probs);
    result.test_labels.push_back(out.test_labels);
    for (const std::string& line : out.lines) result.log_lines.push_back(line);
    fold_values.push_back(out.eval.values);
    json entry = fold_eval_json(out.eval);
    entry["fold"] = f;
    entry["best_epoch"] = out.train.best_epoch;
    entry["epochs_run"] = out.train.epochs_run;
    fold_json.push_back(std::move(entry));
  }
  result.mean_test = cv_aggregate(fold_values);

  json summary;
  summary["experiment"] = exp_name;
  summary["seed"] = config.seed;
  summary["folds"] = config.folds;
  summary["fold_metrics"] = std::move(fold_json);
  summary["mean"] = metrics_json(result.mean_test);
  write_json_file(config.out_dir + "/" + exp_name + "/summary.json", summary);
  return result;
}

namespace {

ExperimentDump read_dump(const RunConfig& config, const std::string& name,
                         std::vector<std::string>* missing) {
  ExperimentDump dump;
  for (int f = 0; f < config.folds; ++f) {
    const std::string path = config.out_dir + "/" + name + "/fold" +
                             std::to_string(f) + "/test_probs.csv";
    if (!fs::exists(path)) {
      missing->push_back(path);
      continue;
    }
    ProbsFile probs = read_probs_csv(path);
    dump.probs.push_back(std::move(probs.probs));
    dump.labels.push_back(std::move(probs.labels));
    dump.patient_ids.push_back(std::move(probs.ids));
  }
  return dump;
}

}  // namespace

FusionRunResult run_fuse(const RunConfig& config) {
  if (config.folds < 2) {
    throw ArgumentError("fuse: need at least 2 folds");
  }
  std::vector<double> grid =
      config.alpha_grid.empty() ? default_alpha_grid() : config.alpha_grid;
  for (double a : grid) {
    if (!(a >= 0.0 && a <= 1.0)) {
      throw ArgumentError("fuse: alpha grid values must lie in [0, 1]");
    }
  }

  std::vector<std::string> missing;
  ExperimentDump imaging = read_dump(config, "imaging", &missing);
  ExperimentDump naim = read_dump(config, "clinical-naim", &missing);
  if (!missing.empty()) {
    std::string joined;
    for (const std::string& m : missing) {
      if (!joined.empty()) joined += ", ";
      joined += m;
    }
    throw MissingInputError("fuse: missing probability dumps: " + joined);
  }
  const bool has_baseline =
      fs::exists(config.out_dir + "/clinical-baseline/fold0/test_probs.csv");
  ExperimentDump baseline;
  if (has_baseline) {
    std::vector<std::string> missing_baseline;
    baseline = read_dump(config, "clinical-baseline", &missing_baseline);
    if (!missing_baseline.empty()) {
      std::string joined;
      for (const std::string& m : missing_baseline) {
        if (!joined.empty()) joined += ", ";
        joined += m;
      }
      throw MissingInputError("fuse: missing probability dumps: " + joined);
    }
  }

  for (int f = 0; f < config.folds; ++f) {
    if (imaging.patient_ids[static_cast<std::size_t>(f)] !=
        naim.patient_ids[static_cast<std::size_t>(f)]) {
      throw DataError("fuse: fold " + std::to_string(f) +
                      ": patient order differs between the imaging and "
                      "clinical dumps");
    }
    if (has_baseline &&
        baseline.patient_ids[static_cast<std::size_t>(f)] !=
            naim.patient_ids[static_cast<std::size_t>(f)]) {
      throw DataError("fuse: fold " + std::to_string(f) +
                      ": patient order differs between the clinical dumps");
    }
  }

  FusionRunResult result;
  result.has_baseline = has_baseline;
  result.sweep = alpha_sweep(naim.probs, imaging.probs, naim.labels, grid);

  std::vector<MetricValues> tmp;
  for (int f = 0; f < config.folds; ++f) {
    result.imaging_folds.push_back(
        evaluate(imaging.probs[static_cast<std::size_t>(f)],
                 imaging.labels[static_cast<std::size_t>(f)]));
    result.naim_folds.push_back(
        evaluate(naim.probs[static_cast<std::size_t>(f)],
                 naim.labels[static_cast<std::size_t>(f)]));
    if (has_baseline) {
      result.baseline_folds.push_back(
          evaluate(baseline.probs[static_cast<std::size_t>(f)],
                   baseline.labels[static_cast<std::size_t>(f)]));
    }
  }
  auto mean_of = [](const std::vector<FoldEval>& evals) {
    std::vector<MetricValues> vals;
    for (const FoldEval& e : evals) vals.push_back(e.values);
    return cv_aggregate(vals);
  };
  result.imaging_mean = mean_of(result.imaging_folds);
  result.naim_mean = mean_of(result.naim_folds);
  if (has_baseline) result.baseline_mean = mean_of(result.baseline_folds);

  // report.json
  json doc;
  doc["seed"] = config.seed;
  doc["folds"] = config.folds;
  doc["alpha_grid"] = grid;
  auto experiment_json = [](const std::vector<FoldEval>& folds,
                            const MetricValues& mean) {
    json j;
    json arr = json::array();
    for (std::size_t f = 0; f < folds.size(); ++f) {
      json entry = fold_eval_json(folds[f]);
      entry["fold"] = static_cast<int>(f);
      arr.push_back(std::move(entry));
    }
    j["folds"] = std::move(arr);
    j["mean"] = metrics_json(mean);
    return j;
  };
  doc["experiments"]["imaging"] =
      experiment_json(result.imaging_folds, result.imaging_mean);
  doc["experiments"]["clinical-naim"] =
      experiment_json(result.naim_folds, result.naim_mean);
  if (has_baseline) {
    doc["experiments"]["clinical-baseline"] =
        experiment_json(result.baseline_folds, result.baseline_mean);
  }
  json grid_json = json::array();
  for (const AlphaPoint& p : result.sweep.grid) {
    json entry;
    entry["alpha"] = p.alpha;
    json arr = json::array();
    for (std::size_t f = 0; f < p.folds.size(); ++f) {
      json fj = fold_eval_json(p.folds[f]);
      fj["fold"] = static_cast<int>(f);
      arr.push_back(std::move(fj));
    }
    entry["folds"] = std::move(arr);
    entry["mean"] = metrics_json(p.mean);
    grid_json.push_back(std::move(entry));
  }
  doc["fusion"]["grid"] = std::move(grid_json);
  doc["fusion"]["best_ba_alpha"] = result.sweep.best_ba_alpha;
  doc["fusion"]["best_mcc_alpha"] = result.sweep.best_mcc_alpha;
  write_json_file(config.out_dir + "/report.json", doc);

  // report.csv — flat twin for plotting.
  CsvTable flat;
  flat.header = {"experiment", "alpha", "fold", "tp",  "fp", "tn",
                 "fn",         "tpr",   "tnr",  "ba",  "mcc"};
  auto push_fold = [&flat](const std::string& exp, const std::string& alpha,
                           const std::string& fold, const FoldEval& e) {
    flat.rows.push_back({exp, alpha, fold, std::to_string(e.counts.tp),
                         std::to_string(e.counts.fp),
                         std::to_string(e.counts.tn),
                         std::to_string(e.counts.fn),
                         format_double(e.values.tpr),
                         format_double(e.values.tnr),
                         format_double(e.values.ba),
                         format_double(e.values.mcc)});
  };
  auto push_mean = [&flat](const std::string& exp, const std::string& alpha,
                           const MetricValues& m) {
    flat.rows.push_back({exp, alpha, "mean", "", "", "", "",
                         format_double(m.tpr), format_double(m.tnr),
                         format_double(m.ba), format_double(m.mcc)});
  };
  auto push_experiment = [&](const std::string& exp,
                             const std::vector<FoldEval>& folds,
                             const MetricValues& mean) {
    for (std::size_t f = 0; f < folds.size(); ++f) {
      push_fold(exp, "", std::to_string(f), folds[f]);
    }
    push_mean(exp, "", mean);
  };
  push_experiment("imaging", result.imaging_folds, result.imaging_mean);
  if (has_baseline) {
    push_experiment("clinical-baseline", result.baseline_folds,
                    result.baseline_mean);
  }
  push_experiment("clinical-naim", result.naim_folds, result.naim_mean);
  for (const AlphaPoint& p : result.sweep.grid) {
    for (std::size_t f = 0; f < p.folds.size(); ++f) {
      push_fold("fusion", format_double(p.alpha), std::to_string(f),
                p.folds[f]);
    }
    push_mean("fusion", format_double(p.alpha), p.mean);
  }
  write_csv(config.out_dir + "/report.csv", flat);
  return result;
}

void print_summary(std::ostream& os, const FusionRunResult& result) {
  const AlphaPoint* best = nullptr;
  for (const AlphaPoint& p : result.sweep.grid) {
    if (p.alpha == result.sweep.best_ba_alpha) {
      best = &p;
      break;
    }
  }
  auto row = [&os](const std::string& name, const MetricValues& m) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-24s %8s %8s %8s %8s\n", name.c_str(),
                  percent(m.tnr).c_str(), percent(m.tpr).c_str(),
                  percent(m.ba).c_str(), percent(m.mcc).c_str());
    os << buf;
  };
  char head[128];
  std::snprintf(head, sizeof(head), "%-24s %8s %8s %8s %8s\n", "experiment",
                "TNR", "TPR", "BA", "MCC");
  os << head;
  row("imaging", result.imaging_mean);
  if (result.has_baseline) {
    row("clinical-baseline", result.baseline_mean);
  }
  row("clinical-naim", result.naim_mean);
  if (best != nullptr) {
    char name[64];
    std::snprintf(name, sizeof(name), "multimodal (alpha=%.2f)",
                  result.sweep.best_ba_alpha);
    row(name, best->mean);
  }
}

void print_report_file(std::ostream& os, const std::string& report_path) {
  if (!fs::exists(report_path)) {
    throw MissingInputError("report not found: " + report_path +
                            " (run fuse first)");
  }
  std::ifstream in(report_path, std::ios::binary);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(report_path + ": " + e.what());
  }
  FusionRunResult result;
  try {
    result.imaging_mean =
        metrics_from_json(doc.at("experiments").at("imaging").at("mean"));
    result.naim_mean =
        metrics_from_json(doc.at("experiments").at("clinical-naim").at("mean"));
    result.has_baseline = doc.at("experiments").contains("clinical-baseline");
    if (result.has_baseline) {
      result.baseline_mean = metrics_from_json(
          doc.at("experiments").at("clinical-baseline").at("mean"));
    }
    result.sweep.best_ba_alpha = doc.at("fusion").at("best_ba_alpha").get<double>();
    result.sweep.best_mcc_alpha =
        doc.at("fusion").at("best_mcc_alpha").get<double>();
    for (const json& p : doc.at("fusion").at("grid")) {
      AlphaPoint point;
      point.alpha = p.at("alpha").get<double>();
      point.mean = metrics_from_json(p.at("mean"));
      result.sweep.grid.push_back(std::move(point));
    }
  } catch (const json::exception& e) {
    throw DataError(report_path + ": " + e.what());
  }
  print_summary(os, result);
}

}  // namespace tabfuse
