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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ctclab/metrics.hpp"
#include "ctclab/rng.hpp"
#include "oracles.hpp"

using namespace ctclab;

namespace {

Matrix from_rows(const std::vector<std::vector<double>>& rows) {
  Matrix m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[0].size(); ++j) m.at(i, j) = rows[i][j];
  return m;
}

}  // namespace

TEST_CASE("recall_at_1: fixtures") {
  SUBCASE("two clusters of identical vectors score 1.0") {
    const Matrix reps = from_rows({{1, 0}, {1, 0}, {1, 0}, {0, 1}, {0, 1}});
    CHECK(recall_at_1(reps, {0, 0, 0, 1, 1}) == 1.0);
  }
  SUBCASE("alternating labels along a line score 0.0") {
    const Matrix reps = from_rows({{1, 1}, {2, 1}, {3, 1}, {4, 1}});
    CHECK(recall_at_1(reps, {0, 1, 0, 1}) == 0.0);
  }
  SUBCASE("five handcrafted vectors match the exhaustive table") {
    const Matrix reps = from_rows({{1.0, 0.0},
                                   {0.95, 0.31225},
                                   {0.0, 1.0},
                                   {0.1, 0.995},
                                   {0.707, 0.707}});
    const std::vector<int> labels = {0, 0, 1, 1, 1};
    // e's nearest neighbor is b (label 0): one miss out of five
    CHECK(recall_at_1(reps, labels) == doctest::Approx(0.8));
    CHECK(recall_at_1(reps, labels) == oracle::pairwise_recall_at_1(reps, labels));
  }
  SUBCASE("a singleton class is a forced miss") {
    const Matrix reps = from_rows({{1, 0}, {1, 0.01}, {0, 1}});
    CHECK(recall_at_1(reps, {0, 0, 1}) == doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("constant representations are all misses under the tie policy") {
    const Matrix reps = from_rows({{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}});
    CHECK(recall_at_1(reps, {0, 0, 1, 1}) == 0.0);
  }
  SUBCASE("needs two samples") {
    CHECK_THROWS_AS(recall_at_1(from_rows({{1.0}}), {0}), std::invalid_argument);
  }
}

TEST_CASE("recall_at_1: permutation invariance and oracle equivalence") {
  Rng rng(1);
  for (int it = 0; it < 40; ++it) {
    const std::size_t n = 5 + rng.below(40);
    const std::size_t d = 2 + rng.below(6);
    Matrix reps(n, d);
    for (double& v : reps.data) v = rng.normal();
    std::vector<int> labels(n);
    for (int& y : labels) y = static_cast<int>(rng.below(4));

    const double base = recall_at_1(reps, labels);
    CHECK(base == oracle::pairwise_recall_at_1(reps, labels));
    CHECK(base >= 0.0);
    CHECK(base <= 1.0);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm);
    Matrix shuffled(n, d);
    std::vector<int> shuffled_labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(reps.row(perm[i]), d, shuffled.row(i));
      shuffled_labels[i] = labels[perm[i]];
    }
    CHECK(recall_at_1(shuffled, shuffled_labels) == base);
  }
}

TEST_CASE("kmeans: fixtures and consistency invariants") {
  SUBCASE("k=1 yields the mean") {
    const Matrix reps = from_rows({{1, 2}, {3, 4}, {5, 6}});
    const ClusteringResult r = kmeans(reps, 1, 0);
    CHECK(r.centroids.at(0, 0) == doctest::Approx(3.0));
    CHECK(r.centroids.at(0, 1) == doctest::Approx(4.0));
  }
  SUBCASE("two point masses are recovered exactly") {
    const Matrix reps = from_rows({{0, 0}, {0, 0}, {5, 5}, {5, 5}});
    const ClusteringResult r = kmeans(reps, 2, 1);
    CHECK(r.inertia == doctest::Approx(0.0));
    CHECK(r.assignments[0] == r.assignments[1]);
    CHECK(r.assignments[2] == r.assignments[3]);
    CHECK(r.assignments[0] != r.assignments[2]);
  }
  SUBCASE("fixed seed reproduces assignments bitwise") {
    Rng rng(2);
    Matrix reps(50, 4);
    for (double& v : reps.data) v = rng.normal();
    const ClusteringResult a = kmeans(reps, 5, 42);
    const ClusteringResult b = kmeans(reps, 5, 42);
    CHECK(a.assignments == b.assignments);
    CHECK(a.centroids.data == b.centroids.data);
    CHECK(a.inertia == b.inertia);
  }
  SUBCASE("k beyond the sample count is rejected") {
    CHECK_THROWS_AS(kmeans(from_rows({{1.0}}), 2, 0), std::invalid_argument);
  }
  SUBCASE("assignments are optimal against the returned centroids") {
    Rng rng(3);
    for (int it = 0; it < 10; ++it) {
      const std::size_t n = 20 + rng.below(50);
      Matrix reps(n, 3);
      for (double& v : reps.data) v = rng.normal();
      const std::size_t k = 2 + rng.below(5);
      const ClusteringResult r = kmeans(reps, k, it);
      double inertia = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double best = 1e300;
        std::size_t arg = 0;
        for (std::size_t c = 0; c < k; ++c) {
          double ds = 0.0;
          for (std::size_t j = 0; j < 3; ++j) {
            const double dlt = reps.at(i, j) - r.centroids.at(c, j);
            ds += dlt * dlt;
          }
          if (ds < best) {
            best = ds;
            arg = c;
          }
        }
        CHECK(static_cast<std::size_t>(r.assignments[i]) == arg);
        inertia += best;
      }
      CHECK(r.inertia == doctest::Approx(inertia).epsilon(1e-12));
    }
  }
}

TEST_CASE("nmi: fixtures") {
  SUBCASE("identical up to relabeling scores 1.0") {
    CHECK(nmi({0, 0, 1, 1, 2}, {2, 2, 0, 0, 1}) == doctest::Approx(1.0));
  }
  SUBCASE("independent assignment scores 0.0") {
    CHECK(nmi({0, 0, 1, 1}, {0, 1, 0, 1}) == doctest::Approx(0.0));
  }
  SUBCASE("frozen contingency value") {
    const double v = nmi({0, 0, 0, 1}, {0, 0, 1, 1});
    CHECK(v == doctest::Approx(0.3456).epsilon(1e-3));
    CHECK(v == doctest::Approx(oracle::contingency_nmi({0, 0, 0, 1}, {0, 0, 1, 1}))
                  .epsilon(1e-12));
  }
  SUBCASE("degenerate single-cluster input scores 0.0") {
    CHECK(nmi({0, 0, 0}, {0, 1, 2}) == 0.0);
  }
  SUBCASE("arithmetic-mean normalization is available") {
    const double sqrt_norm = nmi({0, 0, 0, 1}, {0, 0, 1, 1}, NmiNorm::kSqrt);
    const double mean_norm = nmi({0, 0, 0, 1}, {0, 0, 1, 1}, NmiNorm::kArithmetic);
    CHECK(mean_norm < sqrt_norm);  // H differ, so the mean exceeds the sqrt
    CHECK(mean_norm > 0.0);
  }
}

TEST_CASE("nmi: oracle equivalence, relabeling invariance, range") {
  Rng rng(4);
  for (int it = 0; it < 60; ++it) {
    const std::size_t n = 2 + rng.below(199);
    std::vector<int> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<int>(rng.below(6));
      b[i] = static_cast<int>(rng.below(5));
    }
    const double v = nmi(a, b);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(std::fabs(v - oracle::contingency_nmi(a, b)) <= 1e-9);

    // relabel both sides with an arbitrary injective map
    std::vector<int> a2(n), b2(n);
    for (std::size_t i = 0; i < n; ++i) {
      a2[i] = 7 - a[i];
      b2[i] = b[i] * 13 + 2;
    }
    CHECK(nmi(a2, b2) == doctest::Approx(v).epsilon(1e-12));
  }
}

TEST_CASE("linear_probe: separable data reaches 1.0, shuffled labels sit at chance") {
  SUBCASE("linearly separable two-class representations") {
    Rng rng(5);
    Matrix train(80, 3), test(40, 3);
    std::vector<int> train_labels(80), test_labels(40);
    auto fill = [&](Matrix& m, std::vector<int>& labels) {
      for (std::size_t i = 0; i < m.rows; ++i) {
        const int y = static_cast<int>(rng.below(2));
        labels[i] = y;
        m.at(i, 0) = (y == 0 ? -1.0 : 1.0) + 0.05 * rng.normal();
        m.at(i, 1) = rng.normal();
        m.at(i, 2) = rng.normal();
      }
    };
    fill(train, train_labels);
    fill(test, test_labels);
    ProbeConfig cfg;
    cfg.steps = 300;
    cfg.batch_size = 32;
    cfg.decay_steps = {150, 225};
    cfg.seed = 6;
    CHECK(linear_probe(train, train_labels, test, test_labels, cfg) == doctest::Approx(1.0));
  }
  SUBCASE("uniformly shuffled labels score near 1/k") {
    Rng rng(7);
    const int k = 4;
    Matrix train(600, 8), test(400, 8);
    std::vector<int> train_labels(600), test_labels(400);
    for (double& v : train.data) v = rng.normal();
    for (double& v : test.data) v = rng.normal();
    for (int& y : train_labels) y = static_cast<int>(rng.below(k));
    for (int& y : test_labels) y = static_cast<int>(rng.below(k));
    ProbeConfig cfg;
    cfg.steps = 400;
    cfg.batch_size = 64;
    cfg.decay_steps = {200, 300};
    cfg.seed = 8;
    const double acc = linear_probe(train, train_labels, test, test_labels, cfg);
    const double sigma = std::sqrt(0.25 * 0.75 / 400.0);
    CHECK(std::fabs(acc - 0.25) <= 3.0 * sigma + 1e-9);
  }
  SUBCASE("a class present only in the test split scores at chance, not an error") {
    Matrix train = from_rows({{1, 0}, {1, 0.1}, {-1, 0}, {-1, 0.1}});
    Matrix test = from_rows({{0, 5}, {0, 5}});
    ProbeConfig cfg;
    cfg.steps = 50;
    cfg.batch_size = 4;
    cfg.decay_steps = {};
    const double acc = linear_probe(train, {0, 0, 1, 1}, test, {2, 2}, cfg);
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
  }
  SUBCASE("paper protocol preset carries the published settings") {
    const ProbeConfig cfg = ProbeConfig::paper_a6();
    CHECK(cfg.steps == 15000);
    CHECK(cfg.batch_size == 512);
    CHECK(cfg.lr_init == 0.4);
    CHECK(cfg.lr_decay_factor == 0.1);
    CHECK(cfg.decay_steps == std::vector<std::size_t>{5000, 10000});
    CHECK_NOTHROW(cfg.validate());
  }
  SUBCASE("config invariants") {
    ProbeConfig bad;
    bad.steps = 100;
    bad.decay_steps = {50, 150};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.decay_steps = {60, 50};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  }
}

TEST_CASE("linear_probe: deterministic for a fixed seed and leaves inputs untouched") {
  Rng rng(9);
  Matrix train(100, 5), test(50, 5);
  std::vector<int> train_labels(100), test_labels(50);
  for (double& v : train.data) v = rng.normal();
  for (double& v : test.data) v = rng.normal();
  for (int& y : train_labels) y = static_cast<int>(rng.below(3));
  for (int& y : test_labels) y = static_cast<int>(rng.below(3));
  const std::vector<double> train_before = train.data;

  ProbeConfig cfg;
  cfg.steps = 120;
  cfg.batch_size = 32;
  cfg.decay_steps = {60, 90};
  cfg.seed = 10;
  const double a = linear_probe(train, train_labels, test, test_labels, cfg);
  const double b = linear_probe(train, train_labels, test, test_labels, cfg);
  CHECK(a == b);
  CHECK(train.data == train_before);
}
