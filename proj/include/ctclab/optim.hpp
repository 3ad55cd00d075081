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
#include "ctclab/mlp.hpp"

namespace ctclab {

// Momentum SGD. Weight decay is folded into the gradient (g += wd * p)
// before the velocity update:
//   v <- momentum * v + g,  p <- p - lr * v
struct SgdState {
  double learning_rate = 5e-2;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::vector<Matrix> velocity;

  static SgdState for_params(const ParamSet& params, double lr, double momentum,
                             double weight_decay);
};

void sgd_step(ParamSet& params, const std::vector<Matrix>& grads, SgdState& state);

// Bias-corrected Adam.
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<Matrix> moment1;
  std::vector<Matrix> moment2;

  static AdamState for_params(const ParamSet& params, double lr);
};

void adam_step(ParamSet& params, const std::vector<Matrix>& grads, AdamState& state);

// lr(s) = lr_min + (lr_init - lr_min) * (1 + cos(pi * s / total)) / 2
struct CosineSchedule {
  double lr_init = 5e-2;
  double lr_min = 0.0;
  std::size_t total_steps = 1;

  double at(std::size_t step) const;  // throws std::out_of_range past total_steps
};

}  // namespace ctclab
