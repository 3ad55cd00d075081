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

#include "ctclab/mi.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "ctclab/mlp.hpp"
#include "ctclab/optim.hpp"
#include "ctclab/rng.hpp"

namespace ctclab {

namespace {

constexpr double kLn2Pi = 1.8378770664093454835606594728112;

// Per-column standardization fitted on the given samples. MI is invariant
// under per-coordinate affine maps, and a unit-scale input keeps one Adam
// learning rate adequate across problems. Constant columns map to zero.
struct ColumnScaler {
  std::vector<double> mean, inv_std;

  static ColumnScaler fit(const Matrix& m) {
    ColumnScaler s;
    s.mean.assign(m.cols, 0.0);
    s.inv_std.assign(m.cols, 0.0);
    if (m.rows == 0) return s;
    for (std::size_t i = 0; i < m.rows; ++i)
      for (std::size_t j = 0; j < m.cols; ++j) s.mean[j] += m.at(i, j);
    for (double& v : s.mean) v /= static_cast<double>(m.rows);
    std::vector<double> var(m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i)
      for (std::size_t j = 0; j < m.cols; ++j) {
        const double d = m.at(i, j) - s.mean[j];
        var[j] += d * d;
      }
    for (std::size_t j = 0; j < m.cols; ++j) {
      const double sd = std::sqrt(var[j] / static_cast<double>(m.rows));
      s.inv_std[j] = sd > 1e-12 ? 1.0 / sd : 0.0;
    }
    return s;
  }

  void apply_row(const double* src, double* dst, std::size_t cols) const {
    for (std::size_t j = 0; j < cols; ++j) dst[j] = (src[j] - mean[j]) * inv_std[j];
  }
};

// Writes the standardized concatenation (a_row ++ b_row) into row `r`.
void fill_pair(Matrix& dst, std::size_t r, const Matrix& a, std::size_t ia,
               const Matrix& b, std::size_t ib, const ColumnScaler& sa,
               const ColumnScaler& sb) {
  sa.apply_row(a.row(ia), dst.row(r), a.cols);
  sb.apply_row(b.row(ib), dst.row(r) + a.cols, b.cols);
}

double mean_of(const Matrix& col) {
  double s = 0.0;
  for (double v : col.data) s += v;
  return s / static_cast<double>(col.data.size());
}

// log(mean(exp(f))) with max-shift.
double log_mean_exp(const Matrix& col) {
  double mx = col.data[0];
  for (double v : col.data) mx = std::max(mx, v);
  double s = 0.0;
  for (double v : col.data) s += std::exp(v - mx);
  return mx + std::log(s / static_cast<double>(col.data.size()));
}

}  // namespace

MineConfig MineConfig::paper_a5_input() {
  MineConfig c;
  c.hidden_dim = 1024;
  c.layer_count = 4;
  c.batch_size = 1000;
  c.learning_rate = 1e-4;
  c.train_steps = 10000;
  return c;
}

MineConfig MineConfig::paper_a5_label() {
  MineConfig c;
  c.hidden_dim = 1024;
  c.layer_count = 4;
  c.batch_size = 5000;
  c.learning_rate = 1e-5;
  c.train_steps = 10000;
  return c;
}

void MineConfig::validate() const {
  if (layer_count < 2) throw std::invalid_argument("MineConfig: layer_count must be >= 2");
  if (train_steps < 1) throw std::invalid_argument("MineConfig: train_steps must be >= 1");
  if (hidden_dim < 1 || batch_size < 1)
    throw std::invalid_argument("MineConfig: hidden_dim and batch_size must be >= 1");
  if (learning_rate <= 0.0) throw std::invalid_argument("MineConfig: learning_rate must be > 0");
  if (ema_decay <= 0.0 || ema_decay >= 1.0)
    throw std::invalid_argument("MineConfig: ema_decay must be in (0, 1)");
}

MiEstimate mine_estimate(const Matrix& samples_a, const Matrix& samples_b,
                         const MineConfig& config, std::uint64_t seed) {
  config.validate();
  if (samples_a.rows != samples_b.rows)
    throw std::invalid_argument("mine_estimate: sample counts differ");
  const std::size_t n = samples_a.rows;
  if (n < 2 * config.batch_size)
    throw std::runtime_error("mine_estimate: need at least " +
                             std::to_string(2 * config.batch_size) + " samples, got " +
                             std::to_string(n));

  const ColumnScaler scale_a = ColumnScaler::fit(samples_a);
  const ColumnScaler scale_b = ColumnScaler::fit(samples_b);

  std::vector<std::size_t> dims(config.layer_count - 1, config.hidden_dim);
  dims.push_back(1);
  Mlp critic = Mlp::random_init(samples_a.cols + samples_b.cols, dims,
                                /*rectify_output=*/false, derive_seed(seed, "mine-init"));
  ParamSet params = collect_params(critic);
  AdamState adam = AdamState::for_params(params, config.learning_rate);

  Rng rng(derive_seed(seed, "mine-batches"));

  // Fixed evaluation subset for the tail-window values: the same pairs and
  // the same marginal shuffle at every evaluated step.
  const std::size_t n_eval = std::min(n, config.eval_sample_cap);
  Matrix eval_joint(n_eval, samples_a.cols + samples_b.cols);
  Matrix eval_marg(n_eval, samples_a.cols + samples_b.cols);
  {
    Rng eval_rng(derive_seed(seed, "mine-eval"));
    std::vector<std::size_t> pick(n);
    std::iota(pick.begin(), pick.end(), std::size_t{0});
    eval_rng.shuffle(pick);
    pick.resize(n_eval);
    std::vector<std::size_t> marg = pick;
    eval_rng.shuffle(marg);
    for (std::size_t i = 0; i < n_eval; ++i) {
      fill_pair(eval_joint, i, samples_a, pick[i], samples_b, pick[i], scale_a, scale_b);
      fill_pair(eval_marg, i, samples_a, pick[i], samples_b, marg[i], scale_a, scale_b);
    }
  }

  const std::size_t tail_start = config.train_steps - std::max<std::size_t>(
      1, config.train_steps / 10);
  std::vector<double> tail_values;
  tail_values.reserve(config.train_steps - tail_start);

  Matrix joint_batch(config.batch_size, eval_joint.cols);
  Matrix marg_batch(config.batch_size, eval_joint.cols);
  double ema = 0.0;
  bool ema_ready = false;

  for (std::size_t step = 0; step < config.train_steps; ++step) {
    for (std::size_t i = 0; i < config.batch_size; ++i) {
      const std::size_t ij = rng.below(n);
      fill_pair(joint_batch, i, samples_a, ij, samples_b, ij, scale_a, scale_b);
      const std::size_t ia = rng.below(n);
      const std::size_t ib = rng.below(n);
      fill_pair(marg_batch, i, samples_a, ia, samples_b, ib, scale_a, scale_b);
    }

    Mlp::Cache joint_cache, marg_cache;
    const Matrix f_joint = critic.forward_cached(joint_batch, joint_cache);
    const Matrix f_marg = critic.forward_cached(marg_batch, marg_cache);

    const double inv_b = 1.0 / static_cast<double>(config.batch_size);
    double mean_exp = 0.0;
    for (double v : f_marg.data) mean_exp += std::exp(v);
    mean_exp *= inv_b;
    ema = ema_ready ? config.ema_decay * ema + (1.0 - config.ema_decay) * mean_exp
                    : mean_exp;
    ema_ready = true;

    // Maximize E_J[f] - log E_M[e^f]; the log-term gradient uses the EMA
    // denominator (bias-corrected MINE). Minimization upstream grads:
    Matrix g_joint(f_joint.rows, 1, -inv_b);
    Matrix g_marg(f_marg.rows, 1);
    for (std::size_t i = 0; i < f_marg.rows; ++i)
      g_marg.data[i] = std::exp(f_marg.data[i]) * inv_b / ema;

    Mlp::Grads grads = critic.backward(joint_batch, joint_cache, g_joint);
    Mlp::Grads grads_m = critic.backward(marg_batch, marg_cache, g_marg);
    std::vector<Matrix> flat;
    flat.reserve(params.size());
    for (std::size_t l = 0; l < grads.weight.size(); ++l) {
      add_in_place(grads.weight[l], grads_m.weight[l]);
      add_in_place(grads.bias[l], grads_m.bias[l]);
      flat.push_back(std::move(grads.weight[l]));
      flat.push_back(std::move(grads.bias[l]));
    }
    adam_step(params, flat, adam);

    if (step >= tail_start) {
      const Matrix fe_joint = critic.forward(eval_joint);
      const Matrix fe_marg = critic.forward(eval_marg);
      tail_values.push_back(mean_of(fe_joint) - log_mean_exp(fe_marg));
    }
  }

  MiEstimate est;
  est.steps_used = config.train_steps;
  const double count = static_cast<double>(tail_values.size());
  for (double v : tail_values) est.value += v;
  est.value /= count;
  double var = 0.0;
  for (double v : tail_values) var += (v - est.value) * (v - est.value);
  est.std_error = tail_values.size() > 1 ? std::sqrt(var / (count - 1.0) / count) : 0.0;
  ensure_finite(est.value, "mine_estimate value");
  return est;
}

DiscreteJoint DiscreteJoint::from(Matrix table) {
  if (table.rows == 0 || table.cols == 0)
    throw std::invalid_argument("DiscreteJoint: empty table");
  double sum = 0.0;
  for (double v : table.data) {
    if (!(v >= 0.0)) throw std::invalid_argument("DiscreteJoint: negative or NaN probability");
    sum += v;
  }
  if (std::fabs(sum - 1.0) > 1e-12)
    throw std::invalid_argument("DiscreteJoint: probabilities sum to " + std::to_string(sum) +
                                ", not 1");
  DiscreteJoint j;
  j.p = std::move(table);
  return j;
}

double discrete_mi_exact(const DiscreteJoint& joint) {
  const Matrix& p = joint.p;
  std::vector<double> px(p.rows, 0.0), py(p.cols, 0.0);
  for (std::size_t x = 0; x < p.rows; ++x)
    for (std::size_t y = 0; y < p.cols; ++y) {
      px[x] += p.at(x, y);
      py[y] += p.at(x, y);
    }
  double mi = 0.0;
  for (std::size_t x = 0; x < p.rows; ++x)
    for (std::size_t y = 0; y < p.cols; ++y) {
      const double pxy = p.at(x, y);
      if (pxy > 0.0) mi += pxy * std::log(pxy / (px[x] * py[y]));
    }
  return mi;
}

DiscreteJoint random_discrete_joint(std::size_t x_count, std::size_t y_count,
                                    std::uint64_t seed) {
  Rng rng(derive_seed(seed, "discrete-joint"));
  Matrix t(x_count, y_count);
  double sum = 0.0;
  for (double& v : t.data) {
    v = 0.05 + rng.uniform();  // bounded away from zero: every cell realizable
    sum += v;
  }
  for (double& v : t.data) v /= sum;
  // Compensate rounding so the table passes the 1e-12 normalization gate.
  double err = 0.0;
  for (double v : t.data) err += v;
  t.data[0] += 1.0 - err;
  return DiscreteJoint::from(std::move(t));
}

DiscreteJoint random_factorized_joint(std::size_t x_count, std::size_t y_count,
                                      std::uint64_t seed) {
  Rng rng(derive_seed(seed, "factorized-joint"));
  std::vector<double> px(x_count), py(y_count);
  double sx = 0.0, sy = 0.0;
  for (double& v : px) {
    v = 0.05 + rng.uniform();
    sx += v;
  }
  for (double& v : py) {
    v = 0.05 + rng.uniform();
    sy += v;
  }
  Matrix t(x_count, y_count);
  for (std::size_t x = 0; x < x_count; ++x)
    for (std::size_t y = 0; y < y_count; ++y) t.at(x, y) = (px[x] / sx) * (py[y] / sy);
  double err = 0.0;
  for (double v : t.data) err += v;
  t.data[0] += 1.0 - err;
  return DiscreteJoint::from(std::move(t));
}

std::pair<Matrix, Matrix> sample_discrete_joint(const DiscreteJoint& joint,
                                                std::size_t n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "discrete-samples"));
  const Matrix& p = joint.p;
  Matrix xs(n, p.rows);
  Matrix ys(n, p.cols);
  for (std::size_t i = 0; i < n; ++i) {
    double u = rng.uniform();
    std::size_t x = p.rows - 1, y = p.cols - 1;
    double acc = 0.0;
    bool chosen = false;
    for (std::size_t xi = 0; xi < p.rows && !chosen; ++xi)
      for (std::size_t yi = 0; yi < p.cols && !chosen; ++yi) {
        acc += p.at(xi, yi);
        if (u < acc) {
          x = xi;
          y = yi;
          chosen = true;
        }
      }
    xs.at(i, x) = 1.0;
    ys.at(i, y) = 1.0;
  }
  return {std::move(xs), std::move(ys)};
}

double gaussian_entropy(const Matrix& covariance) {
  const std::size_t d = covariance.rows;
  if (d == 0 || covariance.cols != d)
    throw std::invalid_argument("gaussian_entropy: covariance must be square");
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j)
      if (std::fabs(covariance.at(i, j) - covariance.at(j, i)) > 1e-9)
        throw std::invalid_argument("gaussian_entropy: covariance not symmetric");

  // Cholesky; failure means the matrix is not positive definite.
  Matrix chol(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = covariance.at(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= chol.at(i, k) * chol.at(j, k);
      if (i == j) {
        if (!(s > 0.0))
          throw std::invalid_argument("gaussian_entropy: covariance not positive definite");
        chol.at(i, i) = std::sqrt(s);
      } else {
        chol.at(i, j) = s / chol.at(j, j);
      }
    }
  }
  double log_det = 0.0;
  for (std::size_t i = 0; i < d; ++i) log_det += 2.0 * std::log(chol.at(i, i));
  return 0.5 * log_det + 0.5 * static_cast<double>(d) * (1.0 + kLn2Pi);
}

MaxMiDirection max_mi_linear_direction(const Matrix& data, std::uint64_t seed) {
  if (data.rows < 2) throw std::invalid_argument("max_mi_linear_direction: need >= 2 samples");
  const std::size_t d = data.cols;

  Matrix centered = data;
  Matrix mean = column_sums(data);
  scale_in_place(mean, 1.0 / static_cast<double>(data.rows));
  for (std::size_t i = 0; i < centered.rows; ++i)
    for (std::size_t j = 0; j < d; ++j) centered.at(i, j) -= mean.data[j];

  Matrix cov = matmul_at(centered, centered);
  scale_in_place(cov, 1.0 / static_cast<double>(data.rows - 1));

  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) trace += cov.at(i, i);
  if (!(trace > 1e-300))
    throw std::runtime_error("max_mi_linear_direction: data has zero variance");

  const double eta = static_cast<double>(d) / trace;  // ~1 / mean eigenvalue

  auto ascend = [&](const Matrix& sigma, const std::vector<double>& deflate_dir,
                    double deflate_val, Rng& rng) {
    std::vector<double> w(d), next(d);
    double norm = 0.0;
    for (double& v : w) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : w) v /= norm;

    for (std::size_t it = 0; it < 5000; ++it) {
      // gradient of w^T S w is 2 S w; deflation subtracts the found
      // component so the second sweep climbs to the runner-up.
      for (std::size_t i = 0; i < d; ++i) {
        double g = 0.0;
        for (std::size_t j = 0; j < d; ++j) g += sigma.at(i, j) * w[j];
        next[i] = w[i] + eta * 2.0 * g;
      }
      if (!deflate_dir.empty()) {
        double proj = 0.0;
        for (std::size_t i = 0; i < d; ++i) proj += deflate_dir[i] * w[i];
        for (std::size_t i = 0; i < d; ++i)
          next[i] -= eta * 2.0 * deflate_val * proj * deflate_dir[i];
      }
      double nn = 0.0;
      for (double v : next) nn += v * v;
      nn = std::sqrt(nn);
      double align = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        next[i] /= nn;
        align += next[i] * w[i];
      }
      w = next;
      if (std::fabs(align) > 1.0 - 1e-15 && it > 32) break;
    }
    double value = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      double g = 0.0;
      for (std::size_t j = 0; j < d; ++j) g += sigma.at(i, j) * w[j];
      value += w[i] * g;
    }
    if (!deflate_dir.empty()) {
      double proj = 0.0;
      for (std::size_t i = 0; i < d; ++i) proj += deflate_dir[i] * w[i];
      value -= deflate_val * proj * proj;
    }
    return std::make_pair(w, value);
  };

  Rng rng(derive_seed(seed, "max-mi-direction"));
  auto [w1, lambda1] = ascend(cov, {}, 0.0, rng);
  MaxMiDirection out;
  out.direction = w1;
  out.variance = lambda1;
  if (d > 1) {
    auto [w2, lambda2] = ascend(cov, w1, lambda1, rng);
    (void)w2;
    out.tie = (lambda1 - lambda2) <= 1e-9;
  }
  return out;
}

double infonce_entropy_bound(double loss, std::size_t key_count) {
  if (loss < 0.0) throw std::invalid_argument("infonce_entropy_bound: loss must be >= 0");
  if (key_count < 1) throw std::invalid_argument("infonce_entropy_bound: key_count must be >= 1");
  return std::log(static_cast<double>(key_count)) - loss;
}

}  // namespace ctclab
