// Copyright 2026 The ctclab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "ctclab/datagen.hpp"
#include "ctclab/metrics.hpp"
#include "ctclab/rng.hpp"

using namespace ctclab;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("/tmp/ctclab_test_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

SharedPatternSpec small_spec(std::uint64_t seed) {
  SharedPatternSpec spec;
  spec.train_samples = 200;
  spec.test_samples = 100;
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST_CASE("gen_shared_pair: bitwise determinism") {
  const SharedPatternSpec spec = small_spec(7);
  const SharedPair a = gen_shared_pair(spec);
  const SharedPair b = gen_shared_pair(spec);
  CHECK(a.source.train.features.data == b.source.train.features.data);
  CHECK(a.source.test.features.data == b.source.test.features.data);
  CHECK(a.target.train.features.data == b.target.train.features.data);
  CHECK(a.target.train.labels == b.target.train.labels);
  const SharedPair c = gen_shared_pair(small_spec(8));
  CHECK(a.source.train.features.data != c.source.train.features.data);
}

TEST_CASE("gen_shared_pair: spec validation") {
  SharedPatternSpec spec = small_spec(1);
  spec.shared_dim = 0;
  CHECK_THROWS_AS(gen_shared_pair(spec), std::invalid_argument);
  spec = small_spec(1);
  spec.noise_std = -0.1;
  CHECK_THROWS_AS(gen_shared_pair(spec), std::invalid_argument);
  spec = small_spec(1);
  spec.ambient_dim = 10;  // halves cannot host 8-dim latents
  CHECK_THROWS_AS(gen_shared_pair(spec), std::invalid_argument);
}

TEST_CASE("gen_shared_pair: target labels depend only on the shared latent") {
  SharedPatternSpec spec = small_spec(11);
  SharedPairInternals internals;
  const SharedPair pair = gen_shared_pair(spec, &internals);

  // Recomputing labels from the shared latents alone reproduces the stored
  // labels, so permuting (or replacing) private latents cannot move them.
  CHECK(target_labels_for(internals, internals.target_train_shared) ==
        pair.target.train.labels);
  CHECK(target_labels_for(internals, internals.target_test_shared) ==
        pair.target.test.labels);

  SharedPatternSpec noiseless = spec;
  noiseless.noise_std = 0.0;
  SharedPairInternals clean;
  const SharedPair exact = gen_shared_pair(noiseless, &clean);
  CHECK(target_labels_for(clean, clean.target_train_shared) == exact.target.train.labels);
}

TEST_CASE("gen_shared_pair: splits are disjoint and shapes are consistent") {
  const SharedPatternSpec spec = small_spec(13);
  const SharedPair pair = gen_shared_pair(spec);
  CHECK(pair.source.train.sample_count() == 200);
  CHECK(pair.source.test.sample_count() == 100);
  CHECK(pair.source.train.features.cols == spec.ambient_dim);
  CHECK(pair.target.train.features.cols == spec.ambient_dim);
  CHECK(pair.source.train.class_count == 10);
  CHECK(pair.target.train.class_count == 4);
  for (int y : pair.target.train.labels) {
    CHECK(y >= 0);
    CHECK(y < 4);
  }

  std::set<std::vector<double>> train_rows;
  for (std::size_t i = 0; i < pair.source.train.features.rows; ++i)
    train_rows.insert({pair.source.train.features.row(i),
                       pair.source.train.features.row(i) + spec.ambient_dim});
  for (std::size_t i = 0; i < pair.source.test.features.rows; ++i) {
    const std::vector<double> row(pair.source.test.features.row(i),
                                  pair.source.test.features.row(i) + spec.ambient_dim);
    CHECK(train_rows.count(row) == 0);
  }
}

TEST_CASE("gen_shared_pair: raw target features leave linear-probe headroom") {
  SharedPatternSpec spec;  // full default sizing
  spec.seed = 17;
  const SharedPair pair = gen_shared_pair(spec);
  ProbeConfig cfg;
  cfg.steps = 800;
  cfg.batch_size = 128;
  cfg.decay_steps = {400, 600};
  cfg.seed = 18;
  const double acc = linear_probe(pair.target.train.features, pair.target.train.labels,
                                  pair.target.test.features, pair.target.test.labels, cfg);
  INFO("raw-feature probe accuracy ", acc);
  CHECK(acc >= 0.95);
}

TEST_CASE("csv round trip is bitwise exact") {
  const SharedPair pair = gen_shared_pair(small_spec(19));
  TempFile tmp("roundtrip.csv");
  save_matrix_csv(pair.source.train, tmp.path);
  const Dataset loaded = load_matrix_csv(tmp.path);
  CHECK(loaded.features.data == pair.source.train.features.data);
  CHECK(loaded.labels == pair.source.train.labels);
  CHECK(loaded.class_count == pair.source.train.class_count);
  CHECK(loaded.features.cols == pair.source.train.features.cols);
}

TEST_CASE("load_matrix_csv: malformed inputs carry line numbers") {
  TempFile tmp("malformed.csv");
  SUBCASE("two well-formed rows") {
    std::ofstream(tmp.path) << "label,f0,f1\n0,1.5,2.5\n1,3.5,4.5\n";
    const Dataset ds = load_matrix_csv(tmp.path);
    CHECK(ds.sample_count() == 2);
    CHECK(ds.features.cols == 2);
    CHECK(ds.class_count == 2);
  }
  SUBCASE("missing column names line 3") {
    std::ofstream(tmp.path) << "label,f0,f1\n0,1.0,2.0\n1,3.0\n";
    CHECK_THROWS_WITH_AS(load_matrix_csv(tmp.path), doctest::Contains("line 3"),
                         std::runtime_error);
  }
  SUBCASE("non-numeric cell names its line") {
    std::ofstream(tmp.path) << "label,f0\n0,1.0\n1,abc\n";
    CHECK_THROWS_WITH_AS(load_matrix_csv(tmp.path), doctest::Contains("line 3"),
                         std::runtime_error);
  }
  SUBCASE("negative label is rejected") {
    std::ofstream(tmp.path) << "label,f0\n-1,1.0\n";
    CHECK_THROWS_WITH_AS(load_matrix_csv(tmp.path), doctest::Contains("line 2"),
                         std::runtime_error);
  }
  SUBCASE("missing header") {
    std::ofstream(tmp.path) << "0,1.0\n1,2.0\n";
    CHECK_THROWS_AS(load_matrix_csv(tmp.path), std::runtime_error);
  }
  SUBCASE("missing file names its path") {
    CHECK_THROWS_WITH_AS(load_matrix_csv("/nonexistent/x.csv"),
                         doctest::Contains("/nonexistent/x.csv"), std::runtime_error);
  }
}

TEST_CASE("raw csv round trip") {
  Rng rng(21);
  Matrix m(17, 3);
  for (double& v : m.data) v = rng.normal();
  TempFile tmp("raw.csv");
  save_raw_csv(m, tmp.path);
  const Matrix loaded = load_raw_csv(tmp.path);
  CHECK(loaded.data == m.data);
  CHECK(loaded.rows == m.rows);
}

TEST_CASE("augment: identity, determinism, noise statistics") {
  Rng rng(23);
  Matrix batch(20, 10);
  for (double& v : batch.data) v = rng.normal();

  SUBCASE("strength zero is the identity") {
    const Matrix out = augment(batch, 0.0, 99);
    CHECK(out.data == batch.data);
  }
  SUBCASE("same seed gives the same batch") {
    CHECK(augment(batch, 0.7, 5).data == augment(batch, 0.7, 5).data);
    CHECK(augment(batch, 0.7, 5).data != augment(batch, 0.7, 6).data);
  }
  SUBCASE("unit strength on a zero batch has unit sample std") {
    const Matrix zero(100, 100);
    const Matrix out = augment(zero, 1.0, 7);
    double mean = 0.0;
    for (double v : out.data) mean += v;
    mean /= static_cast<double>(out.size());
    double var = 0.0;
    for (double v : out.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(out.size());
    const double sigma = 1.0 / std::sqrt(2.0 * static_cast<double>(out.size()));
    CHECK(std::fabs(std::sqrt(var) - 1.0) <= 3.0 * sigma);
  }
  SUBCASE("negative strength is rejected") {
    CHECK_THROWS_AS(augment(batch, -1.0, 0), std::invalid_argument);
  }
}
