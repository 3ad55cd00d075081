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

#include <vector>

#include "ctclab/matrix.hpp"
#include "ctclab/mlp.hpp"

namespace ctclab {

// Per-training-sample store of unit-norm representations. Row i belongs to
// training sample i for the whole run.
struct MemoryBank {
  Matrix entries;  // N_train x rep_dim, unit rows
  double momentum = 0.5;

  std::size_t sample_count() const { return entries.rows; }
};

// Entries start from a forward pass of the current backbone.
MemoryBank init_memory_bank(const Mlp& backbone, const Matrix& train_features,
                            double momentum);

// row_i <- normalize(momentum * row_i + (1 - momentum) * new_rep_i).
// new_unit_reps must have unit rows; a zero-norm blend (antipodal
// cancellation) raises std::runtime_error.
void bank_update(MemoryBank& bank, const std::vector<std::size_t>& sample_ids,
                 const Matrix& new_unit_reps);

// Frozen end-of-stage-1 snapshot. `frozen` is a deep copy of the backbone;
// cached_reps are the unit-norm representations of every training sample
// under the frozen parameters, computed once.
struct InformationBank {
  Mlp frozen;
  Matrix cached_reps;  // N_train x rep_dim, unit rows

  bool ready() const { return cached_reps.rows > 0; }
};

InformationBank snapshot_information_bank(const Mlp& backbone,
                                          const Matrix& train_features);

}  // namespace ctclab
