#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "tabfuse/adam.hpp"
#include "tabfuse/errors.hpp"
#include "tabfuse/naim.hpp"
#include "tabfuse/tensor.hpp"

namespace tabfuse {

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  int max_epochs = 100;
  /// Epochs without val-loss improvement (by more than min_delta) before
  /// training stops. 0 disables early stopping.
  int early_stop_patience = 0;
  /// Epochs without improvement before the learning rate divides by
  /// plateau_factor. 0 disables the scheduler.
  int plateau_patience = 0;
  double plateau_factor = 10.0;
  /// 0 trains full-batch; otherwise shuffled mini-batches of this size.
  int batch_size = 0;
  double min_delta = 1e-6;

  static TrainConfig imaging_preset();
  static TrainConfig clinical_baseline_preset();
  static TrainConfig naim_preset();
};

/// Patience counter over a validation-loss series. update() returns true
/// when the loss has not improved by more than min_delta for `patience`
/// consecutive epochs.
class EarlyStopper {
 public:
  EarlyStopper(int patience, double min_delta);
  bool update(double val_loss);
  double best() const { return best_; }
  int stale() const { return stale_; }

 private:
  int patience_;
  double min_delta_;
  double best_ = std::numeric_limits<double>::infinity();
  int stale_ = 0;
};

/// Same counter driving learning-rate decay: update() returns true on the
/// epoch the rate should be divided, then the counter restarts.
class PlateauScheduler {
 public:
  PlateauScheduler(int patience, double min_delta);
  bool update(double val_loss);
  int stale() const { return stale_; }

 private:
  int patience_;
  double min_delta_;
  double best_ = std::numeric_limits<double>::infinity();
  int stale_ = 0;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double learning_rate = 0.0;  // rate used during this epoch
};

struct TrainResult {
  std::vector<EpochRecord> log;
  int best_epoch = 0;  // 1-based; 0 when no epoch ran
  double best_val_loss = std::numeric_limits<double>::infinity();
  int epochs_run = 0;
  std::string abort_reason;  // empty on a clean run
};

/// CSV twin of TrainResult::log (epoch,train_loss,val_loss,learning_rate).
void write_train_log(const std::string& path, const TrainResult& result);

/// RNG streams owned by one training run.
struct TrainStreams {
  std::mt19937_64 dropout;
  std::mt19937_64 shuffle;
};
TrainStreams make_train_streams(std::uint64_t seed, const std::string& model_id,
                                int fold);

namespace detail {
inline std::vector<int> subset_rows(const std::vector<int>& v,
                                    const std::vector<int>& rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (int r : rows) out.push_back(v[static_cast<std::size_t>(r)]);
  return out;
}
inline Matrix subset_batch(const Matrix& x, const std::vector<int>& rows) {
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Index>(i)) = x.row(rows[i]);
  }
  return out;
}
inline NaimBatch subset_batch(const NaimBatch& x, const std::vector<int>& rows) {
  NaimBatch out;
  out.values = subset_batch(x.values, rows);
  out.observed.resize(static_cast<Index>(rows.size()), x.observed.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.observed.row(static_cast<Index>(i)) = x.observed.row(rows[i]);
  }
  return out;
}
inline Index batch_rows(const Matrix& x) { return x.rows(); }
inline Index batch_rows(const NaimBatch& x) { return x.rows(); }
}  // namespace detail

/// Adam training loop with validation-driven early stopping and plateau
/// decay. The returned model state is the epoch with the lowest validation
/// loss seen, restored exactly; TrainResult::log has one row per epoch run.
/// A non-finite loss aborts the run (abort_reason) and keeps the best state
/// reached so far.
template <class Model, class Batch>
TrainResult train_model(Model& model, const Batch& train_x,
                        const std::vector<int>& train_y, const Batch& val_x,
                        const std::vector<int>& val_y, const TrainConfig& cfg,
                        TrainStreams streams) {
  if (detail::batch_rows(train_x) !=
          static_cast<Index>(train_y.size()) ||
      detail::batch_rows(val_x) != static_cast<Index>(val_y.size())) {
    throw ArgumentError("train: feature/label row counts differ");
  }
  if (cfg.max_epochs < 0 || cfg.batch_size < 0) {
    throw ArgumentError("train: negative epoch or batch size");
  }

  TrainResult result;
  Adam adam(cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.weight_decay);
  EarlyStopper stopper(cfg.early_stop_patience, cfg.min_delta);
  PlateauScheduler plateau(cfg.plateau_patience, cfg.min_delta);
  std::vector<Tensor>& params = model.parameters();
  std::vector<Matrix> best_state;

  const Index n_train = detail::batch_rows(train_x);
  std::vector<int> order(static_cast<std::size_t>(n_train));
  for (Index i = 0; i < n_train; ++i) order[static_cast<std::size_t>(i)] = static_cast<int>(i);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double lr_used = adam.learning_rate();
    double train_loss = 0.0;
    if (cfg.batch_size == 0 || cfg.batch_size >= n_train) {
      for (Tensor& p : params) p.zero_grad();
      Tensor loss = model.loss(train_x, train_y, &streams.dropout);
      train_loss = loss.value()(0, 0);
      // A non-finite loss would only poison the optimizer state; skip the
      // step and let the abort check below end the run.
      if (std::isfinite(train_loss)) {
        backward(loss);
        adam.step(params);
      }
    } else {
      std::shuffle(order.begin(), order.end(), streams.shuffle);
      double weighted = 0.0;
      for (std::size_t start = 0; start < order.size();
           start += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t stop =
            std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
        const std::vector<int> rows(order.begin() + static_cast<long>(start),
                                    order.begin() + static_cast<long>(stop));
        for (Tensor& p : params) p.zero_grad();
        Tensor loss = model.loss(detail::subset_batch(train_x, rows),
                                 detail::subset_rows(train_y, rows),
                                 &streams.dropout);
        const double batch_loss = loss.value()(0, 0);
        weighted += batch_loss * static_cast<double>(rows.size());
        if (!std::isfinite(batch_loss)) break;
        backward(loss);
        adam.step(params);
      }
      train_loss = weighted / static_cast<double>(n_train);
    }

    double val_loss = 0.0;
    {
      NoGradScope guard;
      val_loss = model.loss(val_x, val_y, nullptr).value()(0, 0);
    }
    result.log.push_back({epoch, train_loss, val_loss, lr_used});
    result.epochs_run = epoch;

    if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
      result.abort_reason = "non-finite loss at epoch " + std::to_string(epoch);
      break;
    }
    // Track the best state on any strict improvement so the restored model
    // reproduces min(val_loss) exactly, independent of the patience margin.
    if (val_loss < result.best_val_loss) {
      result.best_val_loss = val_loss;
      result.best_epoch = epoch;
      best_state.clear();
      for (const Tensor& p : params) best_state.push_back(p.value());
    }
    if (cfg.early_stop_patience > 0 && stopper.update(val_loss)) break;
    if (cfg.plateau_patience > 0 && plateau.update(val_loss)) {
      adam.set_learning_rate(adam.learning_rate() / cfg.plateau_factor);
    }
  }

  if (!best_state.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      params[i].mutable_value() = best_state[i];
    }
  }
  return result;
}

}  // namespace tabfuse
