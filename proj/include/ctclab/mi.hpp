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
#include <utility>
#include <vector>

#include "ctclab/matrix.hpp"

namespace ctclab {

// Statistics-network and training settings for the neural estimator. The
// desk-scale defaults keep a full information-plane sweep in the minutes
// range; paper_a5_input/paper_a5_label carry the full-scale settings
// (hidden 1024, batch 1000/5000, lr 1e-4/1e-5, 10K steps).
struct MineConfig {
  std::size_t hidden_dim = 64;
  std::size_t layer_count = 4;  // fully-connected layers, output included
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  std::size_t train_steps = 2500;
  double ema_decay = 0.99;        // EMA of E[e^f] used in the log-term gradient
  std::size_t eval_sample_cap = 4096;  // pairs used for tail-window values

  static MineConfig paper_a5_input();  // I(X;T) preset
  static MineConfig paper_a5_label();  // I(T;Y) preset

  void validate() const;
};

struct MiEstimate {
  double value = 0.0;      // nats
  double std_error = 0.0;  // nats, over tail-window variation
  std::size_t steps_used = 0;
};

// Donsker-Varadhan estimate E_joint[f] - log E_marg[e^f], maximized with
// Adam over the statistics network. Rows of a and b are paired samples;
// marginal-product samples pair a-rows with independently drawn b-rows.
// The reported value is the mean over the final 10% of training steps,
// each evaluated on a fixed subset of up to eval_sample_cap pairs.
MiEstimate mine_estimate(const Matrix& samples_a, const Matrix& samples_b,
                         const MineConfig& config, std::uint64_t seed);

// Finite joint distribution; probabilities sum to 1 within 1e-12.
struct DiscreteJoint {
  Matrix p;

  static DiscreteJoint from(Matrix table);  // validates
  std::size_t x_count() const { return p.rows; }
  std::size_t y_count() const { return p.cols; }
};

// Exact mutual information: sum p(x,y) ln[p(x,y) / (p(x) p(y))], 0 ln 0 := 0.
double discrete_mi_exact(const DiscreteJoint& joint);

// Seeded random joint with strictly positive entries.
DiscreteJoint random_discrete_joint(std::size_t x_count, std::size_t y_count,
                                    std::uint64_t seed);
// Product distribution p(x) p(y) from seeded random marginals (MI = 0).
DiscreteJoint random_factorized_joint(std::size_t x_count, std::size_t y_count,
                                      std::uint64_t seed);

// n paired draws from the joint, one-hot encoded: (n x x_count, n x y_count).
std::pair<Matrix, Matrix> sample_discrete_joint(const DiscreteJoint& joint,
                                                std::size_t n, std::uint64_t seed);

// Differential entropy of N(mu, cov): (1/2) ln|cov| + D/2 (1 + ln 2 pi).
// cov must be symmetric positive definite.
double gaussian_entropy(const Matrix& covariance);

struct MaxMiDirection {
  std::vector<double> direction;  // unit vector
  double variance = 0.0;          // achieved w^T Cov w = top eigenvalue
  bool tie = false;               // top two eigenvalues within 1e-9
};

// The unit direction maximizing the variance of the projection (for a
// linear-Gaussian model this is also the max-MI projection). Found by
// projected gradient ascent on w^T Cov w with renormalization after every
// step; the runner-up eigenvalue is estimated by deflation for tie
// detection. Data is centered internally.
MaxMiDirection max_mi_linear_direction(const Matrix& data, std::uint64_t seed);

// ln(key_count) - loss: the mutual-information / entropy lower bound
// certified by a contrastive loss over key_count keys.
double infonce_entropy_bound(double loss, std::size_t key_count);

}  // namespace ctclab
