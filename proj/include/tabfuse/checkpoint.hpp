#pragma once

#include <cstdint>
#include <string>

#include "tabfuse/mlp.hpp"
#include "tabfuse/naim.hpp"

namespace tabfuse {

/// Model checkpoints are JSON: format version, model kind, the hash of the
/// schema the model was fitted against, the model config, and every
/// parameter matrix by name in registration order. Loading refuses a file
/// whose schema hash does not match the schema at hand.
void save_checkpoint(const std::string& path, const NaimModel& model,
                     std::uint64_t schema_hash);
void save_checkpoint(const std::string& path, const MlpModel& model,
                     std::uint64_t schema_hash);

NaimModel load_naim_checkpoint(const std::string& path,
                               const FeatureSchema& schema);
MlpModel load_mlp_checkpoint(const std::string& path,
                             std::uint64_t expected_schema_hash);

}  // namespace tabfuse
