#include "tabfuse/dataset.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <unordered_set>

#include "tabfuse/csv.hpp"
#include "tabfuse/errors.hpp"

namespace tabfuse {

namespace {

bool is_missing(const std::string& cell) { return cell.empty() || cell == "NA"; }

int category_code(const Feature& f, const std::string& value, int data_row) {
  for (std::size_t c = 0; c < f.categories.size(); ++c) {
    if (f.categories[c] == value) return static_cast<int>(c);
  }
  throw DataError("data row " + std::to_string(data_row) + ", column '" +
                  f.name + "': value '" + value + "' is not in the schema");
}

}  // namespace

RawDataset load_csv(const std::string& data_path, const FeatureSchema& schema) {
  const CsvTable table = read_csv(data_path);
  if (table.header.empty() || table.header[0] != "patient_id") {
    throw DataError(data_path + ": first column must be patient_id");
  }
  const bool has_label =
      table.header.size() >= 2 && table.header.back() == "label";
  const std::size_t n_feature_cols =
      table.header.size() - 1 - (has_label ? 1 : 0);
  if (n_feature_cols != schema.size()) {
    throw DataError(data_path + ": expected " +
                    std::to_string(schema.size()) + " feature columns, found " +
                    std::to_string(n_feature_cols));
  }
  for (std::size_t j = 0; j < schema.size(); ++j) {
    if (table.header[j + 1] != schema.at(j).name) {
      throw DataError(data_path + ": column '" + table.header[j + 1] +
                      "' does not match schema feature '" + schema.at(j).name +
                      "'");
    }
  }

  RawDataset ds;
  ds.schema = schema;
  const Index n = static_cast<Index>(table.rows.size());
  const Index f = static_cast<Index>(schema.size());
  ds.observed = BoolArray::Constant(n, f, false);
  std::unordered_set<std::string> ids;
  for (Index r = 0; r < n; ++r) {
    const auto& row = table.rows[static_cast<std::size_t>(r)];
    const int data_row = static_cast<int>(r) + 1;
    if (row[0].empty()) {
      throw DataError(data_path + ": data row " + std::to_string(data_row) +
                      ": empty patient_id");
    }
    if (!ids.insert(row[0]).second) {
      throw DataError(data_path + ": duplicate patient_id '" + row[0] + "'");
    }
    ds.patient_ids.push_back(row[0]);
    std::vector<std::string> cells(static_cast<std::size_t>(f));
    for (Index j = 0; j < f; ++j) {
      const std::string& cell = row[static_cast<std::size_t>(j) + 1];
      const Feature& feat = ds.schema.at(static_cast<std::size_t>(j));
      if (is_missing(cell)) continue;
      if (feat.kind == FeatureKind::kNumerical) {
        double v = 0.0;
        if (!parse_double(cell, v) || !std::isfinite(v)) {
          throw DataError("data row " + std::to_string(data_row) +
                          ", column '" + feat.name + "': cannot parse '" +
                          cell + "' as a number");
        }
      } else {
        category_code(feat, cell, data_row);
      }
      cells[static_cast<std::size_t>(j)] = cell;
      ds.observed(r, j) = true;
    }
    ds.cells.push_back(std::move(cells));
    if (has_label) {
      const std::string& lab = row.back();
      if (lab != "0" && lab != "1") {
        throw DataError("data row " + std::to_string(data_row) +
                        ", column 'label': expected 0 or 1, found '" + lab +
                        "'");
      }
      ds.labels.push_back(lab == "1" ? 1 : 0);
    }
  }
  if (n == 0) {
    throw DataError(data_path + ": no data rows");
  }
  return ds;
}

RawDataset load_csv(const std::string& data_path,
                    const std::string& schema_path) {
  return load_csv(data_path, FeatureSchema::from_csv(schema_path));
}

void EncodedDataset::poison(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> junk(-1e6, 1e6);
  for (Index r = 0; r < token_values.rows(); ++r) {
    for (Index j = 0; j < token_values.cols(); ++j) {
      if (!token_observed(r, j)) token_values(r, j) = junk(rng);
    }
  }
  for (Index r = 0; r < expanded.rows(); ++r) {
    for (Index c = 0; c < expanded.cols(); ++c) {
      if (!expanded_observed(r, c)) expanded(r, c) = junk(rng);
    }
  }
}

EncodedDataset encode(const RawDataset& raw, const std::vector<int>& train_rows) {
  const Index n = raw.rows();
  const Index f = static_cast<Index>(raw.schema.size());
  for (int r : train_rows) {
    if (r < 0 || r >= n) {
      throw ArgumentError("encode: training row " + std::to_string(r) +
                          " out of range");
    }
  }

  EncodedDataset out;
  out.schema = raw.schema;
  out.patient_ids = raw.patient_ids;
  out.labels = raw.labels;
  out.numeric_stats.resize(static_cast<std::size_t>(f));

  // Expanded-view layout.
  for (Index j = 0; j < f; ++j) {
    const Feature& feat = raw.schema.at(static_cast<std::size_t>(j));
    if (feat.kind == FeatureKind::kCategorical) {
      for (std::size_t c = 0; c < feat.categories.size(); ++c) {
        out.expanded_columns.push_back({static_cast<int>(j),
                                        static_cast<int>(c),
                                        feat.name + "=" + feat.categories[c]});
      }
    } else {
      out.expanded_columns.push_back({static_cast<int>(j), -1, feat.name});
    }
  }
  const Index width = static_cast<Index>(out.expanded_columns.size());

  const double kQuarantine = std::numeric_limits<double>::quiet_NaN();
  out.token_values = Matrix::Constant(n, f, kQuarantine);
  out.token_observed = raw.observed;
  out.expanded = Matrix::Constant(n, width, kQuarantine);
  out.expanded_observed = BoolArray::Constant(n, width, false);

  // Normalization statistics from observed training cells only.
  for (Index j = 0; j < f; ++j) {
    const Feature& feat = raw.schema.at(static_cast<std::size_t>(j));
    if (feat.kind != FeatureKind::kNumerical) continue;
    NormStats st;
    double sum = 0.0;
    double sq = 0.0;
    long count = 0;
    for (int r : train_rows) {
      if (!raw.observed(r, j)) continue;
      double v = 0.0;
      parse_double(raw.cells[static_cast<std::size_t>(r)]
                            [static_cast<std::size_t>(j)],
                   v);
      sum += v;
      sq += v * v;
      ++count;
    }
    if (count == 0) {
      st.constant = true;
      out.warnings.push_back("feature '" + feat.name +
                             "' has no observed training value; encoding 0");
    } else {
      st.fitted = true;
      st.mean = sum / static_cast<double>(count);
      const double var =
          std::max(0.0, sq / static_cast<double>(count) - st.mean * st.mean);
      st.stddev = std::sqrt(var);
      if (st.stddev <= 0.0) {
        st.constant = true;
        st.stddev = 1.0;
        out.warnings.push_back("feature '" + feat.name +
                               "' is constant on the training split; "
                               "encoding 0");
      }
    }
    out.numeric_stats[static_cast<std::size_t>(j)] = st;
  }

  // Fill both views.
  Index col0 = 0;
  for (Index j = 0; j < f; ++j) {
    const Feature& feat = raw.schema.at(static_cast<std::size_t>(j));
    const Index block = feat.kind == FeatureKind::kCategorical
                            ? static_cast<Index>(feat.categories.size())
                            : 1;
    for (Index r = 0; r < n; ++r) {
      if (!raw.observed(r, j)) {
        continue;  // masks already false, placeholders already NaN
      }
      const std::string& cell =
          raw.cells[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)];
      switch (feat.kind) {
        case FeatureKind::kCategorical: {
          const int code = category_code(feat, cell, static_cast<int>(r) + 1);
          out.token_values(r, j) = static_cast<double>(code);
          for (Index c = 0; c < block; ++c) {
            out.expanded(r, col0 + c) = c == code ? 1.0 : 0.0;
            out.expanded_observed(r, col0 + c) = true;
          }
          break;
        }
        case FeatureKind::kOrdinal: {
          const int code = category_code(feat, cell, static_cast<int>(r) + 1);
          out.token_values(r, j) = static_cast<double>(code);
          out.expanded(r, col0) = static_cast<double>(code);
          out.expanded_observed(r, col0) = true;
          break;
        }
        case FeatureKind::kNumerical: {
          double v = 0.0;
          parse_double(cell, v);
          const NormStats& st = out.numeric_stats[static_cast<std::size_t>(j)];
          const double z = st.constant ? 0.0 : (v - st.mean) / st.stddev;
          out.token_values(r, j) = z;
          out.expanded(r, col0) = z;
          out.expanded_observed(r, col0) = true;
          break;
        }
      }
    }
    col0 += block;
  }
  return out;
}

const std::string& decode_category(const FeatureSchema& schema, int feature,
                                   int code) {
  const Feature& f = schema.at(static_cast<std::size_t>(feature));
  if (code < 0 || code >= static_cast<int>(f.categories.size())) {
    throw ArgumentError("decode_category: code " + std::to_string(code) +
                        " out of range for feature '" + f.name + "'");
  }
  return f.categories[static_cast<std::size_t>(code)];
}

}  // namespace tabfuse
