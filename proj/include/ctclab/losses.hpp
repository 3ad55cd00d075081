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

#include "ctclab/banks.hpp"
#include "ctclab/matrix.hpp"
#include "ctclab/rng.hpp"

namespace ctclab {

// Use every available key as a contrastive sample.
inline constexpr long kAllKeys = -1;

struct LossConfig {
  double alpha = 0.01;        // stage-1 contrastive weight
  double beta = 1.0;          // stage-2 contrastive weight
  double tau_stage1 = 0.5;
  double tau_stage2 = 0.4;
  long negatives_per_anchor = kAllKeys;
};

struct LossGrad {
  double loss = 0.0;  // nats
  Matrix grad;        // w.r.t. the differentiated input
};

// Mean over the batch of -log softmax(logits)[label].
// grad = (softmax - onehot) / batch.
LossGrad cross_entropy(const Matrix& logits, const std::vector<int>& labels);

// Scales every row to unit L2 norm; throws std::runtime_error on a
// (near-)zero row, which cannot be normalized.
Matrix l2_normalize_rows(const Matrix& m);

// Chain rule through row normalization: given raw inputs and the gradient
// w.r.t. the unit rows, returns the gradient w.r.t. the raw rows.
Matrix l2_normalize_rows_backward(const Matrix& raw, const Matrix& g_unit);

// Mean over anchors of -log[ exp(a.k+ / tau) / sum_j exp(a.k_j / tau) ].
// Anchors and keys must have unit rows (deviation > 1e-6 is a contract
// violation). Keys are constants: gradients are returned for anchors only.
LossGrad info_nce(const Matrix& anchors, const Matrix& keys,
                  const std::vector<std::size_t>& positive_index, double tau);

// Stage-1 contrastive term: anchors are the batch's unit-norm
// representations, the positive key is the memory-bank row of the same
// sample, negatives follow `negatives_per_anchor` (kAllKeys or a count K
// drawn uniformly without replacement from `rng`). Bank rows stay constant.
LossGrad ias_loss(const Matrix& unit_reps, const std::vector<std::size_t>& sample_ids,
                  const MemoryBank& bank, double tau,
                  long negatives_per_anchor = kAllKeys, Rng* rng = nullptr);

// Stage-2 contrastive term against the frozen information bank's cached
// representations. Same key policy as ias_loss; no gradient enters the bank.
LossGrad irs_loss(const Matrix& unit_reps, const std::vector<std::size_t>& sample_ids,
                  const InformationBank& info_bank, double tau,
                  long negatives_per_anchor = kAllKeys, Rng* rng = nullptr);

}  // namespace ctclab
