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

#include "ctclab/banks.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ctclab/losses.hpp"

namespace ctclab {

MemoryBank init_memory_bank(const Mlp& backbone, const Matrix& train_features,
                            double momentum) {
  if (momentum < 0.0 || momentum > 1.0)
    throw std::invalid_argument("init_memory_bank: momentum outside [0, 1]");
  MemoryBank bank;
  bank.momentum = momentum;
  bank.entries = l2_normalize_rows(backbone.forward(train_features));
  return bank;
}

void bank_update(MemoryBank& bank, const std::vector<std::size_t>& sample_ids,
                 const Matrix& new_unit_reps) {
  if (sample_ids.size() != new_unit_reps.rows)
    throw std::invalid_argument("bank_update: one sample id per representation required");
  if (new_unit_reps.cols != bank.entries.cols)
    throw std::invalid_argument("bank_update: representation dim mismatch");
  const double m = bank.momentum;
  for (std::size_t i = 0; i < sample_ids.size(); ++i) {
    const std::size_t id = sample_ids[i];
    if (id >= bank.sample_count())
      throw std::out_of_range("bank_update: sample id " + std::to_string(id) +
                              " >= bank size " + std::to_string(bank.sample_count()));
    const double rep_norm =
        std::sqrt(dot(new_unit_reps.row(i), new_unit_reps.row(i), new_unit_reps.cols));
    if (std::fabs(rep_norm - 1.0) > 1e-6)
      throw std::invalid_argument("bank_update: representation " + std::to_string(i) +
                                  " is not unit norm");
    if (m == 1.0) continue;  // rows are exactly preserved
    double* row = bank.entries.row(id);
    const double* rep = new_unit_reps.row(i);
    double norm_sq = 0.0;
    for (std::size_t j = 0; j < bank.entries.cols; ++j) {
      row[j] = m * row[j] + (1.0 - m) * rep[j];
      norm_sq += row[j] * row[j];
    }
    const double norm = std::sqrt(norm_sq);
    if (!(norm > 1e-12))
      throw std::runtime_error("bank_update: blend for sample " + std::to_string(id) +
                               " cancelled to zero norm");
    for (std::size_t j = 0; j < bank.entries.cols; ++j) row[j] /= norm;
  }
}

InformationBank snapshot_information_bank(const Mlp& backbone,
                                          const Matrix& train_features) {
  InformationBank bank;
  bank.frozen = backbone;  // deep copy: value semantics
  bank.cached_reps = l2_normalize_rows(bank.frozen.forward(train_features));
  return bank;
}

}  // namespace ctclab
