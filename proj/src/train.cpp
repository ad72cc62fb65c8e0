#include "tabfuse/train.hpp"

#include "tabfuse/csv.hpp"
#include "tabfuse/errors.hpp"
#include "tabfuse/rng.hpp"

namespace tabfuse {

TrainConfig TrainConfig::imaging_preset() {
  TrainConfig cfg;
  cfg.learning_rate = 5e-4;
  cfg.weight_decay = 1e-5;
  cfg.max_epochs = 300;
  cfg.early_stop_patience = 30;
  cfg.plateau_patience = 0;
  return cfg;
}

TrainConfig TrainConfig::clinical_baseline_preset() { return imaging_preset(); }

TrainConfig TrainConfig::naim_preset() {
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.weight_decay = 0.0;
  cfg.max_epochs = 1500;
  cfg.early_stop_patience = 100;
  cfg.plateau_patience = 25;
  cfg.plateau_factor = 10.0;
  return cfg;
}

EarlyStopper::EarlyStopper(int patience, double min_delta)
    : patience_(patience), min_delta_(min_delta) {}

bool EarlyStopper::update(double val_loss) {
  if (val_loss < best_ - min_delta_) {
    best_ = val_loss;
    stale_ = 0;
    return false;
  }
  ++stale_;
  return patience_ > 0 && stale_ >= patience_;
}

PlateauScheduler::PlateauScheduler(int patience, double min_delta)
    : patience_(patience), min_delta_(min_delta) {}

bool PlateauScheduler::update(double val_loss) {
  if (val_loss < best_ - min_delta_) {
    best_ = val_loss;
    stale_ = 0;
    return false;
  }
  ++stale_;
  if (patience_ > 0 && stale_ >= patience_) {
    stale_ = 0;
    return true;
  }
  return false;
}

void write_train_log(const std::string& path, const TrainResult& result) {
  CsvTable table;
  table.header = {"epoch", "train_loss", "val_loss", "learning_rate"};
  for (const EpochRecord& r : result.log) {
    table.rows.push_back({std::to_string(r.epoch), format_double(r.train_loss),
                          format_double(r.val_loss),
                          format_double(r.learning_rate)});
  }
  write_csv(path, table);
}

TrainStreams make_train_streams(std::uint64_t seed, const std::string& model_id,
                                int fold) {
  TrainStreams streams;
  streams.dropout = substream(seed, "dropout-" + model_id,
                              static_cast<std::uint64_t>(fold));
  streams.shuffle = substream(seed, "shuffle-" + model_id,
                              static_cast<std::uint64_t>(fold));
  return streams;
}

}  // namespace tabfuse
