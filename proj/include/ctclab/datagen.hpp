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
#include <string>
#include <vector>

#include "ctclab/matrix.hpp"

namespace ctclab {

struct Dataset {
  Matrix features;          // N x D
  std::vector<int> labels;  // in [0, class_count)
  int class_count = 0;
  std::string name;
  std::string split;  // "train" | "test"

  std::size_t sample_count() const { return features.rows; }
};

struct DatasetPair {
  Dataset train;
  Dataset test;
};

// Source/target construction with a controllable shared latent subspace.
// Each sample owns a shared latent z and a dataset-private latent; features
// are the concatenation of orthonormal mixes of the two plus noise. Source
// labels come from a linear partition over (z, z_private) in which the
// private part dominates (shared_label_weight < 1); target labels come from
// a partition over z alone, so transfer hinges on retaining the shared
// subspace. label_margin is the minimum top-2 score gap; samples closer to
// a label boundary are redrawn.
struct SharedPatternSpec {
  std::size_t shared_dim = 8;
  std::size_t source_private_dim = 8;
  std::size_t target_private_dim = 8;
  std::size_t ambient_dim = 24;  // feature dimension of every dataset
  int source_classes = 10;
  int target_classes = 4;
  std::size_t train_samples = 2000;
  std::size_t test_samples = 1000;
  double noise_std = 0.1;
  double label_margin = 0.4;
  double shared_label_weight = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SharedPair {
  DatasetPair source;
  DatasetPair target;
};

// Generating structure, exposed for property tests and debugging.
struct SharedPairInternals {
  Matrix source_partition_shared;   // C_src x shared_dim
  Matrix source_partition_private;  // C_src x source_private_dim
  Matrix target_partition;          // C_tgt x shared_dim
  Matrix target_train_shared;       // per-sample latents of the target splits
  Matrix target_train_private;
  Matrix target_test_shared;
  Matrix target_test_private;
};

// Pure function of the spec: the same spec yields bitwise-identical output.
SharedPair gen_shared_pair(const SharedPatternSpec& spec,
                           SharedPairInternals* internals = nullptr);

// Labels for shared latents under the target partition (margin ignored).
std::vector<int> target_labels_for(const SharedPairInternals& internals,
                                   const Matrix& shared_latents);

// CSV with header `label,f0,f1,...`, one sample per row. Parse failures
// carry 1-based line numbers.
Dataset load_matrix_csv(const std::string& path);
void save_matrix_csv(const Dataset& dataset, const std::string& path);

// Header-less numeric CSV for raw sample matrices.
Matrix load_raw_csv(const std::string& path);
void save_raw_csv(const Matrix& m, const std::string& path);

// Additive Gaussian noise of the given strength plus coordinate dropout at
// rate strength/10 (clamped to [0, 0.5]). strength 0 is the identity.
Matrix augment(const Matrix& batch, double strength, std::uint64_t seed);

}  // namespace ctclab
