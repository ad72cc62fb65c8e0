#include <doctest.h>

#include <fstream>
#include <sstream>
#include <string>

#include "helpers.hpp"
#include "tabfuse/errors.hpp"
#include "tabfuse/synth.hpp"

using namespace tabfuse;

namespace {
std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}
}  // namespace

TEST_CASE("generation is deterministic in the seed, down to the bytes") {
  SynthConfig cfg;
  cfg.rows = 40;
  cfg.seed = 123;
  testutil::TempDir dir("synthdet");
  const SynthResult a = synth_generate(cfg);
  const SynthResult b = synth_generate(cfg);
  write_synth_files(a, dir.path() + "/s1.csv", dir.path() + "/d1.csv",
                    dir.path() + "/e1.csv");
  write_synth_files(b, dir.path() + "/s2.csv", dir.path() + "/d2.csv",
                    dir.path() + "/e2.csv");
  CHECK(slurp(dir.path() + "/s1.csv") == slurp(dir.path() + "/s2.csv"));
  CHECK(slurp(dir.path() + "/d1.csv") == slurp(dir.path() + "/d2.csv"));
  CHECK(slurp(dir.path() + "/e1.csv") == slurp(dir.path() + "/e2.csv"));

  cfg.seed = 124;
  const SynthResult c = synth_generate(cfg);
  CHECK(c.data.cells != a.data.cells);
}

TEST_CASE("the written files load back into an equivalent cohort") {
  SynthConfig cfg;
  cfg.rows = 25;
  cfg.missing_rate = 0.3;
  cfg.embedding_dim = 8;
  cfg.seed = 5;
  testutil::TempDir dir("synthload");
  const SynthResult r = synth_generate(cfg);
  write_synth_files(r, dir.path() + "/schema.csv", dir.path() + "/data.csv",
                    dir.path() + "/embeddings.csv");
  const RawDataset back =
      load_csv(dir.path() + "/data.csv", FeatureSchema::from_csv(dir.path() + "/schema.csv"));
  REQUIRE(back.rows() == 25);
  CHECK(back.labels == r.data.labels);
  CHECK(back.patient_ids == r.data.patient_ids);
  for (Index i = 0; i < back.rows(); ++i) {
    for (Index j = 0; j < static_cast<Index>(back.schema.size()); ++j) {
      CHECK(back.observed(i, j) == r.data.observed(i, j));
    }
  }
  CHECK(r.embeddings.rows() == 25);
  CHECK(r.embeddings.cols() == 8);
}

TEST_CASE("patient ids are zero-padded and unique") {
  SynthConfig cfg;
  cfg.rows = 12;
  const SynthResult r = synth_generate(cfg);
  CHECK(r.data.patient_ids.front() == "P0001");
  CHECK(r.data.patient_ids.back() == "P0012");
}

TEST_CASE("missing rate zero observes everything; 0.3 lands near 0.3") {
  SynthConfig cfg;
  cfg.rows = 50;
  cfg.missing_rate = 0.0;
  const SynthResult all = synth_generate(cfg);
  CHECK(all.observed_fraction == 1.0);
  CHECK(all.data.observed.all());

  cfg.rows = 1000;
  cfg.missing_rate = 0.3;
  cfg.seed = 9;
  const SynthResult some = synth_generate(cfg);
  CHECK(some.observed_fraction > 0.67);
  CHECK(some.observed_fraction < 0.73);
}

TEST_CASE("label-dependent missingness separates the classes") {
  SynthConfig cfg;
  cfg.rows = 2000;
  cfg.missing_rate = 0.3;
  cfg.missing_mode = MissingMode::kLabelDependent;
  cfg.missing_delta = 0.15;
  cfg.seed = 11;
  const SynthResult r = synth_generate(cfg);
  const Index m = static_cast<Index>(r.data.schema.size());
  double miss_pos = 0.0, miss_neg = 0.0;
  long pos_cells = 0, neg_cells = 0;
  for (Index i = 0; i < r.data.rows(); ++i) {
    for (Index j = 0; j < m; ++j) {
      if (r.data.labels[static_cast<std::size_t>(i)] == 1) {
        miss_pos += !r.data.observed(i, j);
        ++pos_cells;
      } else {
        miss_neg += !r.data.observed(i, j);
        ++neg_cells;
      }
    }
  }
  miss_pos /= static_cast<double>(pos_cells);
  miss_neg /= static_cast<double>(neg_cells);
  CHECK(miss_pos > 0.41);  // target 0.45
  CHECK(miss_pos < 0.49);
  CHECK(miss_neg > 0.11);  // target 0.15
  CHECK(miss_neg < 0.19);
}

TEST_CASE("the planted signal reaches both channels") {
  SynthConfig cfg;
  cfg.rows = 1500;
  cfg.missing_rate = 0.0;
  cfg.imaging_signal = 1.5;
  cfg.imaging_noise = 0.5;
  cfg.seed = 21;
  const SynthResult r = synth_generate(cfg);
  CHECK(r.prevalence > 0.2);
  CHECK(r.prevalence < 0.65);

  // Embedding rows of the two classes differ in the mean projection onto
  // the class-mean difference direction.
  Eigen::RowVectorXd mean_pos = Eigen::RowVectorXd::Zero(r.embeddings.cols());
  Eigen::RowVectorXd mean_neg = mean_pos;
  double npos = 0, nneg = 0;
  for (Index i = 0; i < r.embeddings.rows(); ++i) {
    if (r.data.labels[static_cast<std::size_t>(i)] == 1) {
      mean_pos += r.embeddings.row(i);
      ++npos;
    } else {
      mean_neg += r.embeddings.row(i);
      ++nneg;
    }
  }
  mean_pos /= npos;
  mean_neg /= nneg;
  // Pure sampling noise would put this gap near 0.3 for these counts; the
  // planted signal has to push it well past that.
  CHECK((mean_pos - mean_neg).norm() > 0.8);
}

TEST_CASE("configuration is validated") {
  SynthConfig cfg;
  cfg.rows = 1;
  CHECK_THROWS_AS(synth_generate(cfg), ArgumentError);
  cfg.rows = 10;
  cfg.missing_rate = 1.2;
  CHECK_THROWS_AS(synth_generate(cfg), ArgumentError);
  cfg.missing_rate = 0.2;
  cfg.embedding_dim = 0;
  CHECK_THROWS_AS(synth_generate(cfg), ArgumentError);
}
