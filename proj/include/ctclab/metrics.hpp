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

#pragma once

#include <cstdint>
#include <vector>

#include "ctclab/matrix.hpp"

namespace ctclab {

// Fraction of samples whose cosine nearest neighbor (self excluded) shares
// their label. Representations are normalized internally; zero rows keep
// similarity 0 to everything. When several keys tie for the maximum
// similarity exactly, the query counts as a hit only if every tied key
// shares its label; a class with a single sample is a forced miss.
double recall_at_1(const Matrix& reps, const std::vector<int>& labels);

struct ClusteringResult {
  std::vector<int> assignments;
  Matrix centroids;
  double inertia = 0.0;
};

// Lloyd's algorithm with k-means++ seeding; at most 300 iterations or until
// every centroid moves < 1e-6. An emptied cluster is re-seeded from the
// point farthest from its assigned centroid. Deterministic for fixed seed.
ClusteringResult kmeans(const Matrix& reps, std::size_t k, std::uint64_t seed);

enum class NmiNorm { kSqrt, kArithmetic };

// MI(a; b) normalized by sqrt(H(a) H(b)) (or the arithmetic mean), natural
// log, 0/0 := 0. Invariant under relabeling of either side.
double nmi(const std::vector<int>& a, const std::vector<int>& b,
           NmiNorm norm = NmiNorm::kSqrt);

struct ProbeConfig {
  std::size_t steps = 400;
  std::size_t batch_size = 128;
  double lr_init = 0.4;
  double lr_decay_factor = 0.1;
  std::vector<std::size_t> decay_steps = {200, 300};
  std::uint64_t seed = 0;

  // 15K steps, batch 512, lr 4e-1 decayed x0.1 at the 5K-th and 10K-th steps.
  static ProbeConfig paper_a6();

  void validate() const;
};

// Trains a fresh softmax classifier on frozen train-split representations
// with plain SGD and step-decayed lr; returns top-1 accuracy on the test
// split. The representations are inputs: nothing upstream is touched.
// A class present only in the test split simply scores at chance.
double linear_probe(const Matrix& train_reps, const std::vector<int>& train_labels,
                    const Matrix& test_reps, const std::vector<int>& test_labels,
                    const ProbeConfig& config);

}  // namespace ctclab
