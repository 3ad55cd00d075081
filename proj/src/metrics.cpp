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

#include "ctclab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "ctclab/losses.hpp"
#include "ctclab/mlp.hpp"
#include "ctclab/optim.hpp"
#include "ctclab/rng.hpp"

namespace ctclab {

namespace {

// Unit rows where possible; zero rows stay zero.
Matrix safe_normalize_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double n = std::sqrt(dot(m.row(i), m.row(i), m.cols));
    if (n > 1e-300) {
      double* r = out.row(i);
      for (std::size_t j = 0; j < m.cols; ++j) r[j] /= n;
    }
  }
  return out;
}

double entropy_of_counts(const std::unordered_map<int, std::size_t>& counts, double n) {
  double h = 0.0;
  for (const auto& [_, c] : counts) {
    const double p = static_cast<double>(c) / n;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double sq_dist(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

double recall_at_1(const Matrix& reps, const std::vector<int>& labels) {
  if (reps.rows < 2) throw std::invalid_argument("recall_at_1: need at least 2 samples");
  if (labels.size() != reps.rows)
    throw std::invalid_argument("recall_at_1: one label per sample required");

  const Matrix unit = safe_normalize_rows(reps);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < unit.rows; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    bool all_match = false;
    for (std::size_t j = 0; j < unit.rows; ++j) {
      if (j == i) continue;
      const double sim = dot(unit.row(i), unit.row(j), unit.cols);
      if (sim > best) {
        best = sim;
        all_match = labels[j] == labels[i];
      } else if (sim == best && labels[j] != labels[i]) {
        all_match = false;
      }
    }
    if (all_match) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(unit.rows);
}

ClusteringResult kmeans(const Matrix& reps, std::size_t k, std::uint64_t seed) {
  const std::size_t n = reps.rows;
  const std::size_t d = reps.cols;
  if (k < 1 || k > n) throw std::invalid_argument("kmeans: k outside [1, sample count]");

  Rng rng(derive_seed(seed, "kmeans"));
  Matrix centroids(k, d);

  // k-means++: first centroid uniform, the rest D^2-weighted.
  std::vector<double> dist_sq(n, std::numeric_limits<double>::infinity());
  {
    const std::size_t first = rng.below(n);
    std::copy_n(reps.row(first), d, centroids.row(0));
    for (std::size_t c = 1; c < k; ++c) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        dist_sq[i] = std::min(dist_sq[i], sq_dist(reps.row(i), centroids.row(c - 1), d));
        total += dist_sq[i];
      }
      std::size_t pick = 0;
      if (total > 0.0) {
        const double target = rng.uniform() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          acc += dist_sq[i];
          if (target < acc) {
            pick = i;
            break;
          }
          pick = i;  // rounding: fall through to the last index
        }
      } else {
        pick = rng.below(n);
      }
      std::copy_n(reps.row(pick), d, centroids.row(c));
    }
  }

  ClusteringResult result;
  result.assignments.assign(n, 0);
  std::vector<std::size_t> counts(k, 0);
  Matrix sums(k, d);

  for (std::size_t iter = 0; iter < 300; ++iter) {
    std::fill(counts.begin(), counts.end(), std::size_t{0});
    std::fill(sums.data.begin(), sums.data.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const double ds = sq_dist(reps.row(i), centroids.row(c), d);
        if (ds < best) {
          best = ds;
          arg = c;
        }
      }
      result.assignments[i] = static_cast<int>(arg);
      counts[arg] += 1;
      const double* r = reps.row(i);
      double* srow = sums.row(arg);
      for (std::size_t j = 0; j < d; ++j) srow[j] += r[j];
    }

    // Re-seed emptied clusters from the points farthest from their own
    // centroid, one point per empty cluster.
    std::vector<bool> stolen(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      double far_dist = -1.0;
      std::size_t far_idx = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (stolen[i]) continue;
        const std::size_t own = static_cast<std::size_t>(result.assignments[i]);
        if (counts[own] <= 1) continue;  // keep donor clusters nonempty
        const double ds = sq_dist(reps.row(i), centroids.row(own), d);
        if (ds > far_dist) {
          far_dist = ds;
          far_idx = i;
        }
      }
      if (far_dist < 0.0) continue;  // all points coincide: leave cluster empty
      stolen[far_idx] = true;
      const std::size_t donor = static_cast<std::size_t>(result.assignments[far_idx]);
      counts[donor] -= 1;
      const double* r = reps.row(far_idx);
      double* drow = sums.row(donor);
      for (std::size_t j = 0; j < d; ++j) drow[j] -= r[j];
      result.assignments[far_idx] = static_cast<int>(c);
      counts[c] = 1;
      std::copy_n(r, d, sums.row(c));
    }

    double max_shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      double shift_sq = 0.0;
      double* crow = centroids.row(c);
      const double* srow = sums.row(c);
      for (std::size_t j = 0; j < d; ++j) {
        const double updated = srow[j] / static_cast<double>(counts[c]);
        const double delta = updated - crow[j];
        shift_sq += delta * delta;
        crow[j] = updated;
      }
      max_shift = std::max(max_shift, std::sqrt(shift_sq));
    }
    if (max_shift < 1e-6) break;
  }

  // Final assignment against the converged centroids.
  result.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t c = 0; c < k; ++c) {
      const double ds = sq_dist(reps.row(i), centroids.row(c), d);
      if (ds < best) {
        best = ds;
        arg = c;
      }
    }
    result.assignments[i] = static_cast<int>(arg);
    result.inertia += best;
  }
  result.centroids = std::move(centroids);
  return result;
}

double nmi(const std::vector<int>& a, const std::vector<int>& b, NmiNorm norm) {
  if (a.size() != b.size()) throw std::invalid_argument("nmi: length mismatch");
  if (a.empty()) throw std::invalid_argument("nmi: empty input");
  const double n = static_cast<double>(a.size());

  std::unordered_map<int, std::size_t> ca, cb;
  std::unordered_map<long long, std::size_t> joint;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca[a[i]] += 1;
    cb[b[i]] += 1;
    joint[(static_cast<long long>(a[i]) << 32) ^ static_cast<unsigned int>(b[i])] += 1;
  }

  double mi = 0.0;
  for (const auto& [key, c] : joint) {
    const int xa = static_cast<int>(key >> 32);
    const int xb = static_cast<int>(key & 0xffffffffLL);
    const double pxy = static_cast<double>(c) / n;
    const double px = static_cast<double>(ca.at(xa)) / n;
    const double py = static_cast<double>(cb.at(xb)) / n;
    mi += pxy * std::log(pxy / (px * py));
  }
  const double ha = entropy_of_counts(ca, n);
  const double hb = entropy_of_counts(cb, n);
  const double denom = norm == NmiNorm::kSqrt ? std::sqrt(ha * hb) : 0.5 * (ha + hb);
  if (denom <= 0.0) return 0.0;
  return std::clamp(mi / denom, 0.0, 1.0);
}

ProbeConfig ProbeConfig::paper_a6() {
  ProbeConfig c;
  c.steps = 15000;
  c.batch_size = 512;
  c.lr_init = 0.4;
  c.lr_decay_factor = 0.1;
  c.decay_steps = {5000, 10000};
  return c;
}

void ProbeConfig::validate() const {
  if (steps < 1 || batch_size < 1)
    throw std::invalid_argument("ProbeConfig: steps and batch_size must be >= 1");
  if (lr_init <= 0.0) throw std::invalid_argument("ProbeConfig: lr_init must be > 0");
  for (std::size_t i = 0; i < decay_steps.size(); ++i) {
    if (decay_steps[i] >= steps)
      throw std::invalid_argument("ProbeConfig: decay step beyond total steps");
    if (i > 0 && decay_steps[i] <= decay_steps[i - 1])
      throw std::invalid_argument("ProbeConfig: decay steps must be strictly increasing");
  }
}

double linear_probe(const Matrix& train_reps_in, const std::vector<int>& train_labels,
                    const Matrix& test_reps_in, const std::vector<int>& test_labels,
                    const ProbeConfig& config) {
  config.validate();
  if (train_reps_in.cols != test_reps_in.cols)
    throw std::invalid_argument("linear_probe: representation dims differ");
  if (train_labels.size() != train_reps_in.rows || test_labels.size() != test_reps_in.rows)
    throw std::invalid_argument("linear_probe: label count mismatch");

  // Standardize per dimension on the train split. An affine reparam cannot
  // change what is linearly decodable, but it makes one lr adequate for
  // representations of any scale; constant dimensions map to zero.
  Matrix train_reps = train_reps_in;
  Matrix test_reps = test_reps_in;
  {
    const std::size_t d = train_reps.cols;
    std::vector<double> mean(d, 0.0), inv_std(d, 0.0);
    for (std::size_t i = 0; i < train_reps.rows; ++i)
      for (std::size_t j = 0; j < d; ++j) mean[j] += train_reps.at(i, j);
    for (double& v : mean) v /= static_cast<double>(train_reps.rows);
    std::vector<double> var(d, 0.0);
    for (std::size_t i = 0; i < train_reps.rows; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        const double delta = train_reps.at(i, j) - mean[j];
        var[j] += delta * delta;
      }
    for (std::size_t j = 0; j < d; ++j) {
      const double sd = std::sqrt(var[j] / static_cast<double>(train_reps.rows));
      inv_std[j] = sd > 1e-12 ? 1.0 / sd : 0.0;
    }
    for (std::size_t i = 0; i < train_reps.rows; ++i)
      for (std::size_t j = 0; j < d; ++j)
        train_reps.at(i, j) = (train_reps.at(i, j) - mean[j]) * inv_std[j];
    for (std::size_t i = 0; i < test_reps.rows; ++i)
      for (std::size_t j = 0; j < d; ++j)
        test_reps.at(i, j) = (test_reps.at(i, j) - mean[j]) * inv_std[j];
  }

  int max_label = 0;
  for (int y : train_labels) max_label = std::max(max_label, y);
  for (int y : test_labels) max_label = std::max(max_label, y);
  const std::size_t classes = static_cast<std::size_t>(max_label) + 1;

  LinearHead head = LinearHead::random_init(train_reps.cols, classes,
                                            derive_seed(config.seed, "probe-head"));
  ParamSet params;
  params.tensors = {&head.layer.weight, &head.layer.bias};
  params.names = {"probe.weight", "probe.bias"};
  SgdState sgd = SgdState::for_params(params, config.lr_init, /*momentum=*/0.0,
                                      /*weight_decay=*/0.0);

  Rng shuffle_rng(derive_seed(config.seed, "probe-shuffle"));
  const std::size_t n = train_reps.rows;
  const std::size_t batch = std::min<std::size_t>(config.batch_size, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = n;  // forces an initial shuffle

  Matrix batch_reps(batch, train_reps.cols);
  std::vector<int> batch_labels(batch);
  std::size_t decays_applied = 0;

  for (std::size_t step = 0; step < config.steps; ++step) {
    while (decays_applied < config.decay_steps.size() &&
           step == config.decay_steps[decays_applied]) {
      sgd.learning_rate *= config.lr_decay_factor;
      ++decays_applied;
    }
    if (cursor + batch > n) {
      shuffle_rng.shuffle(order);
      cursor = 0;
    }
    for (std::size_t i = 0; i < batch; ++i) {
      const std::size_t src = order[cursor + i];
      std::copy_n(train_reps.row(src), train_reps.cols, batch_reps.row(i));
      batch_labels[i] = train_labels[src];
    }
    cursor += batch;

    const Matrix logits = head.forward(batch_reps);
    const LossGrad ce = cross_entropy(logits, batch_labels);
    std::vector<Matrix> grads;
    grads.push_back(matmul_at(batch_reps, ce.grad));
    grads.push_back(column_sums(ce.grad));
    sgd_step(params, grads, sgd);
  }

  const Matrix logits = head.forward(test_reps);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const double* row = logits.row(i);
    std::size_t arg = 0;
    for (std::size_t j = 1; j < classes; ++j)
      if (row[j] > row[arg]) arg = j;
    if (static_cast<int>(arg) == test_labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.rows);
}

}  // namespace ctclab
