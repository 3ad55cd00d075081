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

#include "ctclab/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace ctclab {

namespace {

constexpr double kUnitNormTolerance = 1e-6;

void require_unit_rows(const Matrix& m, const char* what) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double n = std::sqrt(dot(m.row(i), m.row(i), m.cols));
    if (std::fabs(n - 1.0) > kUnitNormTolerance) {
      throw std::invalid_argument(std::string(what) + " row " + std::to_string(i) +
                                  " is not unit norm (|" + std::to_string(n) + "| - 1 > 1e-6)");
    }
  }
}

// One anchor against the key rows listed in key_ids; key_ids[pos_slot] is
// the positive. Accumulates the anchor gradient (not yet averaged) and
// returns this anchor's loss.
double nce_anchor(const double* anchor, const Matrix& keys,
                  const std::size_t* key_ids, std::size_t key_count,
                  std::size_t pos_slot, double tau, std::vector<double>& scores,
                  double* grad_anchor) {
  scores.resize(key_count);
  double max_score = -HUGE_VAL;
  for (std::size_t s = 0; s < key_count; ++s) {
    scores[s] = dot(anchor, keys.row(key_ids[s]), keys.cols) / tau;
    max_score = std::max(max_score, scores[s]);
  }
  double sum_exp = 0.0;
  for (std::size_t s = 0; s < key_count; ++s) sum_exp += std::exp(scores[s] - max_score);
  const double lse = max_score + std::log(sum_exp);
  for (std::size_t s = 0; s < key_count; ++s) {
    const double p = std::exp(scores[s] - lse);
    const double coeff = (p - (s == pos_slot ? 1.0 : 0.0)) / tau;
    const double* krow = keys.row(key_ids[s]);
    for (std::size_t j = 0; j < keys.cols; ++j) grad_anchor[j] += coeff * krow[j];
  }
  return lse - scores[pos_slot];
}

// Shared implementation for info_nce / ias_loss / irs_loss once anchors,
// key matrix and per-anchor positive ids are settled.
LossGrad nce_against_bank(const Matrix& anchors, const Matrix& keys,
                          const std::vector<std::size_t>& positive_ids,
                          double tau, long negatives_per_anchor, Rng* rng,
                          const char* what) {
  if (tau <= 0.0) throw std::invalid_argument(std::string(what) + ": tau must be > 0");
  if (anchors.cols != keys.cols)
    throw std::invalid_argument(std::string(what) + ": anchor/key dims differ");
  if (positive_ids.size() != anchors.rows)
    throw std::invalid_argument(std::string(what) + ": one positive id per anchor required");
  if (anchors.rows == 0) throw std::invalid_argument(std::string(what) + ": empty batch");
  for (std::size_t id : positive_ids) {
    if (id >= keys.rows)
      throw std::out_of_range(std::string(what) + ": sample id " + std::to_string(id) +
                              " >= key count " + std::to_string(keys.rows));
  }
  require_unit_rows(anchors, what);
  require_unit_rows(keys, what);

  const std::size_t n_keys = keys.rows;
  long k = negatives_per_anchor;
  if (k != kAllKeys) {
    if (k < 1) throw std::invalid_argument(std::string(what) + ": negatives_per_anchor must be >= 1");
    if (rng == nullptr)
      throw std::invalid_argument(std::string(what) + ": K-subsampling needs an rng");
    k = std::min<long>(k, static_cast<long>(n_keys) - 1);
  }

  LossGrad out;
  out.grad = Matrix(anchors.rows, anchors.cols);
  std::vector<double> scores;
  double total = 0.0;

  if (k == kAllKeys) {
    std::vector<std::size_t> all_ids(n_keys);
    std::iota(all_ids.begin(), all_ids.end(), std::size_t{0});
    for (std::size_t i = 0; i < anchors.rows; ++i) {
      total += nce_anchor(anchors.row(i), keys, all_ids.data(), n_keys,
                          positive_ids[i], tau, scores, out.grad.row(i));
    }
  } else {
    // Positive in slot 0, then K negatives drawn without replacement from
    // the remaining ids via a partial Fisher-Yates pass.
    std::vector<std::size_t> pool(n_keys);
    std::vector<std::size_t> subset(static_cast<std::size_t>(k) + 1);
    for (std::size_t i = 0; i < anchors.rows; ++i) {
      std::iota(pool.begin(), pool.end(), std::size_t{0});
      std::swap(pool[positive_ids[i]], pool[n_keys - 1]);
      subset[0] = positive_ids[i];
      std::size_t remaining = n_keys - 1;
      for (long s = 0; s < k; ++s) {
        const std::size_t j = rng->below(remaining);
        subset[static_cast<std::size_t>(s) + 1] = pool[j];
        std::swap(pool[j], pool[remaining - 1]);
        --remaining;
      }
      total += nce_anchor(anchors.row(i), keys, subset.data(), subset.size(),
                          /*pos_slot=*/0, tau, scores, out.grad.row(i));
    }
  }

  const double inv_n = 1.0 / static_cast<double>(anchors.rows);
  out.loss = total * inv_n;
  scale_in_place(out.grad, inv_n);
  ensure_finite(out.loss, std::string(what) + " loss");
  return out;
}

}  // namespace

LossGrad cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
  if (labels.size() != logits.rows)
    throw std::invalid_argument("cross_entropy: one label per row required");
  if (logits.rows == 0) throw std::invalid_argument("cross_entropy: empty batch");
  const std::size_t classes = logits.cols;

  LossGrad out;
  out.grad = Matrix(logits.rows, classes);
  const double inv_n = 1.0 / static_cast<double>(logits.rows);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
      throw std::out_of_range("cross_entropy: label " + std::to_string(y) + " outside [0, " +
                              std::to_string(classes) + ") at row " + std::to_string(i));
    const double* row = logits.row(i);
    double max_logit = row[0];
    for (std::size_t j = 1; j < classes; ++j) max_logit = std::max(max_logit, row[j]);
    double sum_exp = 0.0;
    for (std::size_t j = 0; j < classes; ++j) sum_exp += std::exp(row[j] - max_logit);
    const double lse = max_logit + std::log(sum_exp);
    total += lse - row[y];
    double* grow = out.grad.row(i);
    for (std::size_t j = 0; j < classes; ++j) {
      const double p = std::exp(row[j] - lse);
      grow[j] = (p - (static_cast<std::size_t>(y) == j ? 1.0 : 0.0)) * inv_n;
    }
  }
  out.loss = total * inv_n;
  ensure_finite(out.loss, "cross_entropy loss");
  return out;
}

Matrix l2_normalize_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double n = std::sqrt(dot(m.row(i), m.row(i), m.cols));
    if (!(n > 1e-300))
      throw std::runtime_error("l2_normalize_rows: zero-norm row " + std::to_string(i));
    double* r = out.row(i);
    for (std::size_t j = 0; j < m.cols; ++j) r[j] /= n;
  }
  return out;
}

Matrix l2_normalize_rows_backward(const Matrix& raw, const Matrix& g_unit) {
  if (!raw.same_shape(g_unit))
    throw std::invalid_argument("l2_normalize_rows_backward: shape mismatch");
  Matrix g_raw(raw.rows, raw.cols);
  for (std::size_t i = 0; i < raw.rows; ++i) {
    const double* x = raw.row(i);
    const double* g = g_unit.row(i);
    const double n = std::sqrt(dot(x, x, raw.cols));
    if (!(n > 1e-300))
      throw std::runtime_error("l2_normalize_rows_backward: zero-norm row " + std::to_string(i));
    const double gx = dot(g, x, raw.cols);
    const double inv_n = 1.0 / n;
    const double inv_n3 = inv_n * inv_n * inv_n;
    double* out = g_raw.row(i);
    for (std::size_t j = 0; j < raw.cols; ++j) out[j] = g[j] * inv_n - x[j] * gx * inv_n3;
  }
  return g_raw;
}

LossGrad info_nce(const Matrix& anchors, const Matrix& keys,
                  const std::vector<std::size_t>& positive_index, double tau) {
  return nce_against_bank(anchors, keys, positive_index, tau, kAllKeys, nullptr, "info_nce");
}

LossGrad ias_loss(const Matrix& unit_reps, const std::vector<std::size_t>& sample_ids,
                  const MemoryBank& bank, double tau, long negatives_per_anchor,
                  Rng* rng) {
  return nce_against_bank(unit_reps, bank.entries, sample_ids, tau,
                          negatives_per_anchor, rng, "ias_loss");
}

LossGrad irs_loss(const Matrix& unit_reps, const std::vector<std::size_t>& sample_ids,
                  const InformationBank& info_bank, double tau,
                  long negatives_per_anchor, Rng* rng) {
  if (!info_bank.ready())
    throw std::runtime_error("irs_loss: information bank snapshot missing");
  return nce_against_bank(unit_reps, info_bank.cached_reps, sample_ids, tau,
                          negatives_per_anchor, rng, "irs_loss");
}

}  // namespace ctclab
