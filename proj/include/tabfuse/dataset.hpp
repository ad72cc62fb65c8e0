#pragma once

#include <random>
#include <string>
#include <vector>

#include "tabfuse/schema.hpp"
#include "tabfuse/tensor.hpp"

namespace tabfuse {

/// Cohort as loaded from disk: raw cell strings plus the observation mask.
/// Missing cells are stored as "" regardless of how the file spelled them.
struct RawDataset {
  FeatureSchema schema;
  std::vector<std::string> patient_ids;
  std::vector<std::vector<std::string>> cells;  // rows x features
  BoolArray observed;                           // rows x features
  std::vector<int> labels;                      // empty when the file had none

  Index rows() const { return static_cast<Index>(patient_ids.size()); }
  bool has_labels() const { return !labels.empty(); }
};

/// Loads a data CSV against a schema. Layout: `patient_id` first, schema
/// features in schema order, then an optional trailing `label` column.
/// "" and "NA" (case-sensitive) mark missing cells. Unknown columns,
/// unparsable numerals and out-of-vocabulary categories raise a DataError
/// naming the row and column.
RawDataset load_csv(const std::string& data_path, const FeatureSchema& schema);
RawDataset load_csv(const std::string& data_path,
                    const std::string& schema_path);

/// Training-split normalization for one numerical feature. `stddev` is the
/// population standard deviation over observed training cells.
struct NormStats {
  double mean = 0.0;
  double stddev = 1.0;
  bool constant = false;
  bool fitted = false;
};

/// Where an expanded-view column came from: `feature` is the schema index;
/// `category` is the one-hot category index, or -1 for rank/value columns.
struct EncodedColumn {
  int feature = 0;
  int category = -1;
  std::string name;
};

/// Both model-facing encodings of a cohort.
///
/// Token view (one column per schema feature): integer category codes,
/// ordinal ranks, z-scored numericals. Expanded view: one-hot blocks for
/// categoricals, rank column for ordinals, z-scored column for numericals.
///
/// Missing cells hold a quarantined placeholder (NaN) that no consumer may
/// read while the matching mask entry is false; poison() randomizes the
/// placeholders so tests can prove nothing peeks at them.
struct EncodedDataset {
  FeatureSchema schema;
  std::vector<std::string> patient_ids;
  std::vector<int> labels;

  Matrix token_values;
  BoolArray token_observed;

  Matrix expanded;
  BoolArray expanded_observed;  // per expanded column
  std::vector<EncodedColumn> expanded_columns;

  std::vector<NormStats> numeric_stats;  // indexed by schema feature
  std::vector<std::string> warnings;

  Index rows() const { return token_values.rows(); }
  void poison(std::mt19937_64& rng);
};

/// Encodes every row of `raw`; normalization statistics are fitted on
/// `train_rows` only (observed cells only). A numerical feature with no
/// observed training cell or zero variance encodes to 0 and is flagged in
/// `warnings`.
EncodedDataset encode(const RawDataset& raw, const std::vector<int>& train_rows);

/// Category label for an integer code (inverse of the token encoding).
const std::string& decode_category(const FeatureSchema& schema, int feature,
                                   int code);

}  // namespace tabfuse
