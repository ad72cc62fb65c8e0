#include "tabfuse/synth.hpp"

#include <cmath>
#include <random>

#include "tabfuse/csv.hpp"
#include "tabfuse/errors.hpp"
#include "tabfuse/rng.hpp"

namespace tabfuse {

std::vector<SynthFeature> default_synth_features() {
  std::vector<SynthFeature> fs;
  fs.push_back({{"sex", FeatureKind::kCategorical, {"female", "male"}}, 0.30});
  fs.push_back(
      {{"smoking", FeatureKind::kCategorical, {"never", "former", "current"}},
       0.50});
  fs.push_back(
      {{"histology", FeatureKind::kCategorical, {"adeno", "squamous", "other"}},
       0.25});
  fs.push_back(
      {{"stage", FeatureKind::kOrdinal, {"II", "IIIA", "IIIB"}}, 0.70});
  fs.push_back(
      {{"comorbidity", FeatureKind::kCategorical, {"none", "mild", "severe"}},
       0.20});
  fs.push_back({{"age", FeatureKind::kNumerical, {}}, -0.35, 64.0, 9.0});
  fs.push_back({{"weight_kg", FeatureKind::kNumerical, {}}, 0.15, 72.0, 14.0});
  fs.push_back({{"pdl1", FeatureKind::kNumerical, {}}, 0.90, 35.0, 25.0});
  fs.push_back(
      {{"cigarettes_per_day", FeatureKind::kNumerical, {}}, 0.40, 12.0, 8.0});
  return fs;
}

FeatureSchema synth_schema(const std::vector<SynthFeature>& features) {
  std::vector<Feature> fs;
  fs.reserve(features.size());
  for (const SynthFeature& f : features) fs.push_back(f.feature);
  return FeatureSchema(std::move(fs));
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

SynthResult synth_generate(const SynthConfig& config) {
  if (config.rows < 2) {
    throw ArgumentError("generate: need at least 2 rows");
  }
  if (config.missing_rate < 0.0 || config.missing_rate > 1.0) {
    throw ArgumentError("generate: missing rate must lie in [0, 1]");
  }
  if (config.missing_delta < 0.0) {
    throw ArgumentError("generate: missing delta must be non-negative");
  }
  if (config.embedding_dim < 1) {
    throw ArgumentError("generate: embedding dim must be at least 1");
  }
  const std::vector<SynthFeature> features =
      config.features.empty() ? default_synth_features() : config.features;
  const FeatureSchema schema = synth_schema(features);
  const Index n = config.rows;
  const Index f = static_cast<Index>(features.size());

  auto values_rng = substream(config.seed, "synth-values");
  auto labels_rng = substream(config.seed, "synth-labels");
  auto missing_rng = substream(config.seed, "synth-missing");
  auto embed_rng = substream(config.seed, "synth-embed");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Fixed direction carrying the imaging signal.
  Eigen::VectorXd u(config.embedding_dim);
  for (Index d = 0; d < u.size(); ++d) u(d) = normal(embed_rng);
  u.normalize();

  SynthResult out;
  out.data.schema = schema;
  out.data.observed = BoolArray::Constant(n, f, true);
  out.embeddings = Matrix::Zero(n, config.embedding_dim);

  const int id_width = std::max<int>(4, std::to_string(n).size());
  long positives = 0;
  long observed_cells = 0;
  for (Index r = 0; r < n; ++r) {
    std::string id = std::to_string(r + 1);
    id.insert(0, static_cast<std::size_t>(id_width) - id.size(), '0');
    out.data.patient_ids.push_back("P" + id);

    std::vector<std::string> cells(static_cast<std::size_t>(f));
    double z = config.intercept;
    for (Index j = 0; j < f; ++j) {
      const SynthFeature& sf = features[static_cast<std::size_t>(j)];
      double contribution = 0.0;
      if (sf.feature.kind == FeatureKind::kNumerical) {
        const double eps = normal(values_rng);
        contribution = eps;
        cells[static_cast<std::size_t>(j)] =
            format_double(sf.loc + sf.scale * eps);
      } else {
        const int m = static_cast<int>(sf.feature.categories.size());
        std::uniform_int_distribution<int> pick(0, m - 1);
        const int code = pick(values_rng);
        contribution = 2.0 * code / (m - 1) - 1.0;
        cells[static_cast<std::size_t>(j)] =
            sf.feature.categories[static_cast<std::size_t>(code)];
      }
      z += sf.weight * contribution;
    }

    const int label = unit(labels_rng) < sigmoid(z) ? 1 : 0;
    out.data.labels.push_back(label);
    positives += label;

    double rate = config.missing_rate;
    if (config.missing_mode == MissingMode::kLabelDependent) {
      rate += label == 1 ? config.missing_delta : -config.missing_delta;
      rate = std::min(1.0, std::max(0.0, rate));
    }
    for (Index j = 0; j < f; ++j) {
      const bool missing = unit(missing_rng) < rate;
      if (missing) {
        out.data.observed(r, j) = false;
        cells[static_cast<std::size_t>(j)].clear();
      } else {
        ++observed_cells;
      }
    }
    out.data.cells.push_back(std::move(cells));

    const double carrier =
        config.imaging_signal * z + config.imaging_noise * normal(embed_rng);
    for (Index d = 0; d < config.embedding_dim; ++d) {
      out.embeddings(r, d) =
          carrier * u(d) + config.background_noise * normal(embed_rng);
    }
  }
  out.prevalence = static_cast<double>(positives) / static_cast<double>(n);
  out.observed_fraction =
      static_cast<double>(observed_cells) / static_cast<double>(n * f);
  return out;
}

void write_synth_files(const SynthResult& result,
                       const std::string& schema_path,
                       const std::string& data_path,
                       const std::string& embeddings_path) {
  result.data.schema.to_csv(schema_path);

  CsvTable data;
  data.header.push_back("patient_id");
  for (const Feature& f : result.data.schema.features()) {
    data.header.push_back(f.name);
  }
  data.header.push_back("label");
  for (Index r = 0; r < result.data.rows(); ++r) {
    std::vector<std::string> row;
    row.push_back(result.data.patient_ids[static_cast<std::size_t>(r)]);
    for (Index j = 0; j < static_cast<Index>(result.data.schema.size()); ++j) {
      const std::string& cell =
          result.data.cells[static_cast<std::size_t>(r)]
                           [static_cast<std::size_t>(j)];
      row.push_back(result.data.observed(r, j) ? cell : "NA");
    }
    row.push_back(result.data.labels[static_cast<std::size_t>(r)] == 1 ? "1"
                                                                       : "0");
    data.rows.push_back(std::move(row));
  }
  write_csv(data_path, data);

  CsvTable emb;
  emb.header.push_back("patient_id");
  for (Index d = 0; d < result.embeddings.cols(); ++d) {
    emb.header.push_back("e" + std::to_string(d));
  }
  for (Index r = 0; r < result.embeddings.rows(); ++r) {
    std::vector<std::string> row;
    row.push_back(result.data.patient_ids[static_cast<std::size_t>(r)]);
    for (Index d = 0; d < result.embeddings.cols(); ++d) {
      row.push_back(format_double(result.embeddings(r, d)));
    }
    emb.rows.push_back(std::move(row));
  }
  write_csv(embeddings_path, emb);
}

}  // namespace tabfuse
