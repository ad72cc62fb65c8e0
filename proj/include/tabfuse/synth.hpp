#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tabfuse/dataset.hpp"
#include "tabfuse/schema.hpp"

namespace tabfuse {

/// One generated feature: its schema entry, its weight in the planted
/// logit, and (for numericals) the raw-value affine loc + scale * eps.
struct SynthFeature {
  Feature feature;
  double weight = 0.0;
  double loc = 0.0;
  double scale = 1.0;
};

enum class MissingMode { kMcar, kLabelDependent };

struct SynthConfig {
  int rows = 100;
  double missing_rate = 0.2;
  MissingMode missing_mode = MissingMode::kMcar;
  /// Label-dependent mode: positives see rate+delta, negatives rate-delta,
  /// both clamped to [0, 1].
  double missing_delta = 0.15;
  double intercept = -0.6;
  int embedding_dim = 32;
  /// Imaging channel: embeddings = (signal*z + noise*eps) * u + background
  /// elementwise noise, with z the planted logit and u a fixed unit vector.
  double imaging_signal = 1.0;
  double imaging_noise = 1.2;
  double background_noise = 1.0;
  std::uint64_t seed = 42;
  /// Defaults to default_synth_features() when empty.
  std::vector<SynthFeature> features;
};

/// The stock nine-feature clinical panel (categoricals, ordinals and
/// numericals mixed, unequal weights).
std::vector<SynthFeature> default_synth_features();
FeatureSchema synth_schema(const std::vector<SynthFeature>& features);

struct SynthResult {
  RawDataset data;    // labels included
  Matrix embeddings;  // rows x embedding_dim, aligned with data rows
  double prevalence = 0.0;
  double observed_fraction = 0.0;
};

/// Draws a cohort with a planted logistic signal. Labels are Bernoulli in
/// the planted logit; embeddings carry a correlated but noisier copy of the
/// same signal. Deterministic in config.seed.
SynthResult synth_generate(const SynthConfig& config);

void write_synth_files(const SynthResult& result,
                       const std::string& schema_path,
                       const std::string& data_path,
                       const std::string& embeddings_path);

}  // namespace tabfuse
