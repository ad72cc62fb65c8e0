#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include "helpers.hpp"
#include "tabfuse/mlp.hpp"
#include "tabfuse/rng.hpp"
#include "tabfuse/train.hpp"

using namespace tabfuse;
using testutil::random_matrix;

namespace {
// Noisy but separable two-cluster problem.
void make_problem(int n, Matrix& x, std::vector<int>& y, std::uint64_t seed) {
  std::mt19937_64 rng = substream(seed, "train-problem");
  std::normal_distribution<double> noise(0.0, 1.0);
  x.resize(n, 3);
  y.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    y[static_cast<std::size_t>(i)] = label;
    const double center = label == 0 ? -1.0 : 1.0;
    for (int j = 0; j < 3; ++j) x(i, j) = center + 0.8 * noise(rng);
  }
}
}  // namespace

TEST_CASE("the early stopper counts stale epochs against a min-delta margin") {
  EarlyStopper stop(2, 0.1);
  CHECK_FALSE(stop.update(1.0));   // first value is always an improvement
  CHECK_FALSE(stop.update(0.95));  // better, but not by >0.1: stale 1
  CHECK(stop.best() == 1.0);
  CHECK_FALSE(stop.update(0.85));  // true improvement resets the counter
  CHECK(stop.best() == 0.85);
  CHECK_FALSE(stop.update(0.80));  // stale 1
  CHECK(stop.update(0.80));        // stale 2 == patience: stop
}

TEST_CASE("the plateau scheduler fires exactly at its patience, then restarts") {
  PlateauScheduler sched(25, 1e-6);
  CHECK_FALSE(sched.update(1.0));
  for (int i = 1; i <= 24; ++i) {
    CHECK_FALSE(sched.update(1.0));
    CHECK(sched.stale() == i);
  }
  CHECK(sched.update(1.0));  // 25th stale epoch
  CHECK(sched.stale() == 0);
  // The cycle repeats without an intervening improvement.
  for (int i = 1; i <= 24; ++i) CHECK_FALSE(sched.update(1.0));
  CHECK(sched.update(1.0));
  // An improvement larger than min_delta resets mid-cycle.
  for (int i = 1; i <= 10; ++i) CHECK_FALSE(sched.update(1.0));
  CHECK_FALSE(sched.update(0.5));
  CHECK(sched.stale() == 0);
}

TEST_CASE("improvements of exactly min_delta do not reset the counters") {
  EarlyStopper stop(1, 0.5);
  CHECK_FALSE(stop.update(2.0));
  CHECK(stop.update(1.5));  // 2.0 - 0.5 is not < best - min_delta
}

TEST_CASE("training restores the exact best-validation state") {
  Matrix train_x, val_x;
  std::vector<int> train_y, val_y;
  make_problem(24, train_x, train_y, 1);
  make_problem(10, val_x, val_y, 2);

  MlpConfig mcfg;
  mcfg.input = 3;
  mcfg.hidden = {8};
  std::mt19937_64 init = substream(3, "init-train");
  MlpModel model(mcfg, init);

  TrainConfig cfg;
  cfg.learning_rate = 5e-2;  // deliberately jumpy so val loss fluctuates
  cfg.max_epochs = 60;
  cfg.early_stop_patience = 0;

  const TrainResult result =
      train_model(model, train_x, train_y, val_x, val_y, cfg,
                  make_train_streams(4, "unit", 0));
  REQUIRE(result.epochs_run == 60);
  REQUIRE(result.log.size() == 60);
  CHECK(result.abort_reason.empty());

  double best_seen = std::numeric_limits<double>::infinity();
  for (const EpochRecord& r : result.log) best_seen = std::min(best_seen, r.val_loss);
  CHECK(result.best_val_loss == best_seen);
  CHECK(result.log[static_cast<std::size_t>(result.best_epoch - 1)].val_loss ==
        best_seen);

  // Re-evaluating the restored parameters reproduces the recorded best loss
  // bit for bit.
  NoGradScope guard;
  const double revalidated = model.loss(val_x, val_y).value()(0, 0);
  CHECK(revalidated == result.best_val_loss);
}

TEST_CASE("early stopping ends the run before max_epochs on a stall") {
  Matrix train_x, val_x;
  std::vector<int> train_y, val_y;
  make_problem(24, train_x, train_y, 5);
  make_problem(10, val_x, val_y, 6);

  MlpConfig mcfg;
  mcfg.input = 3;
  mcfg.hidden = {4};
  std::mt19937_64 init = substream(7, "init-es");
  MlpModel model(mcfg, init);

  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.max_epochs = 5000;
  cfg.early_stop_patience = 10;

  const TrainResult result =
      train_model(model, train_x, train_y, val_x, val_y, cfg,
                  make_train_streams(8, "unit-es", 0));
  CHECK(result.epochs_run < 5000);
  CHECK(result.epochs_run > result.best_epoch);  // ran past the best epoch
  CHECK(result.abort_reason.empty());
}

TEST_CASE("plateau decay divides the learning rate on schedule") {
  Matrix train_x, val_x;
  std::vector<int> train_y, val_y;
  make_problem(16, train_x, train_y, 9);
  make_problem(8, val_x, val_y, 10);

  MlpConfig mcfg;
  mcfg.input = 3;
  mcfg.hidden = {4};
  std::mt19937_64 init = substream(11, "init-plateau");
  MlpModel model(mcfg, init);

  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.max_epochs = 7;
  cfg.plateau_patience = 2;
  cfg.plateau_factor = 10.0;
  // An absurd margin means no epoch ever counts as an improvement, making
  // the decay cadence fully predictable: after epochs 3, 5, 7, ...
  cfg.min_delta = 1e9;

  const TrainResult result =
      train_model(model, train_x, train_y, val_x, val_y, cfg,
                  make_train_streams(12, "unit-plateau", 0));
  REQUIRE(result.log.size() == 7);
  CHECK(result.log[0].learning_rate == 1e-3);
  CHECK(result.log[2].learning_rate == 1e-3);
  CHECK(result.log[3].learning_rate == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(result.log[4].learning_rate == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(result.log[5].learning_rate == doctest::Approx(1e-5).epsilon(1e-12));
  CHECK(result.log[6].learning_rate == doctest::Approx(1e-5).epsilon(1e-12));
}

TEST_CASE("mini-batch training consumes the shuffle stream deterministically") {
  Matrix train_x, val_x;
  std::vector<int> train_y, val_y;
  make_problem(20, train_x, train_y, 13);
  make_problem(8, val_x, val_y, 14);

  MlpConfig mcfg;
  mcfg.input = 3;
  mcfg.hidden = {4};
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.max_epochs = 12;
  cfg.batch_size = 6;

  std::mt19937_64 i1 = substream(15, "init-mb");
  MlpModel m1(mcfg, i1);
  const TrainResult r1 = train_model(m1, train_x, train_y, val_x, val_y, cfg,
                                     make_train_streams(16, "mb", 0));
  std::mt19937_64 i2 = substream(15, "init-mb");
  MlpModel m2(mcfg, i2);
  const TrainResult r2 = train_model(m2, train_x, train_y, val_x, val_y, cfg,
                                     make_train_streams(16, "mb", 0));
  REQUIRE(r1.log.size() == r2.log.size());
  for (std::size_t i = 0; i < r1.log.size(); ++i) {
    CHECK(r1.log[i].train_loss == r2.log[i].train_loss);
    CHECK(r1.log[i].val_loss == r2.log[i].val_loss);
  }
  // A different fold index shifts the shuffle stream.
  std::mt19937_64 i3 = substream(15, "init-mb");
  MlpModel m3(mcfg, i3);
  const TrainResult r3 = train_model(m3, train_x, train_y, val_x, val_y, cfg,
                                     make_train_streams(16, "mb", 1));
  bool any_diff = false;
  for (std::size_t i = 0; i < r1.log.size(); ++i) {
    any_diff = any_diff || r1.log[i].train_loss != r3.log[i].train_loss;
  }
  CHECK(any_diff);
}

TEST_CASE("a non-finite loss aborts the run and reports the epoch") {
  Matrix train_x, val_x;
  std::vector<int> train_y, val_y;
  make_problem(12, train_x, train_y, 17);
  make_problem(6, val_x, val_y, 18);

  MlpConfig mcfg;
  mcfg.input = 3;
  mcfg.hidden = {4};
  std::mt19937_64 init = substream(19, "init-abort");
  MlpModel model(mcfg, init);
  // Poison one weight so the very first forward pass is NaN.
  model.parameters()[0].mutable_value()(0, 0) =
      std::numeric_limits<double>::quiet_NaN();

  TrainConfig cfg;
  cfg.max_epochs = 50;
  const TrainResult result =
      train_model(model, train_x, train_y, val_x, val_y, cfg,
                  make_train_streams(20, "abort", 0));
  CHECK(result.epochs_run == 1);
  CHECK(result.best_epoch == 0);
  CHECK(result.abort_reason.find("epoch 1") != std::string::npos);
}

TEST_CASE("the train log round-trips through its CSV file") {
  testutil::TempDir dir("trainlog");
  TrainResult result;
  result.log.push_back({1, 0.7, 0.71, 1e-3});
  result.log.push_back({2, 0.65, 0.66, 1e-3});
  result.log.push_back({3, 0.61, 0.67, 1e-4});
  const std::string path = dir.path() + "/train_log.csv";
  write_train_log(path, result);

  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,train_loss,val_loss,learning_rate");
  std::getline(in, line);
  CHECK(line == "1,0.7,0.71,0.001");
  int more = 0;
  while (std::getline(in, line) && !line.empty()) ++more;
  CHECK(more == 2);
}

TEST_CASE("training presets carry the stock hyperparameters") {
  const TrainConfig img = TrainConfig::imaging_preset();
  CHECK(img.learning_rate == 5e-4);
  CHECK(img.weight_decay == 1e-5);
  CHECK(img.max_epochs == 300);
  CHECK(img.early_stop_patience == 30);
  CHECK(img.plateau_patience == 0);
  CHECK(img.batch_size == 0);

  const TrainConfig naim = TrainConfig::naim_preset();
  CHECK(naim.learning_rate == 1e-3);
  CHECK(naim.weight_decay == 0.0);
  CHECK(naim.max_epochs == 1500);
  CHECK(naim.early_stop_patience == 100);
  CHECK(naim.plateau_patience == 25);
  CHECK(naim.plateau_factor == 10.0);

  const TrainConfig base = TrainConfig::clinical_baseline_preset();
  CHECK(base.learning_rate == img.learning_rate);
  CHECK(base.max_epochs == img.max_epochs);
}
