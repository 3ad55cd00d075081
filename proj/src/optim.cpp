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

#include "ctclab/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace ctclab {

namespace {

void check_grads(const ParamSet& params, const std::vector<Matrix>& grads,
                 const std::vector<Matrix>& buffers) {
  if (grads.size() != params.size() || buffers.size() != params.size())
    throw std::invalid_argument("optimizer: parameter/gradient count mismatch");
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (!params.tensors[t]->same_shape(grads[t]))
      throw std::invalid_argument("optimizer: gradient shape mismatch for " + params.names[t]);
    if (!all_finite(grads[t]))
      throw std::runtime_error("non-finite gradient for parameter " + params.names[t]);
  }
}

std::vector<Matrix> zeros_like(const ParamSet& params) {
  std::vector<Matrix> out;
  out.reserve(params.size());
  for (const Matrix* t : params.tensors) out.emplace_back(t->rows, t->cols);
  return out;
}

}  // namespace

SgdState SgdState::for_params(const ParamSet& params, double lr, double momentum,
                              double weight_decay) {
  SgdState s;
  s.learning_rate = lr;
  s.momentum = momentum;
  s.weight_decay = weight_decay;
  s.velocity = zeros_like(params);
  return s;
}

void sgd_step(ParamSet& params, const std::vector<Matrix>& grads, SgdState& state) {
  check_grads(params, grads, state.velocity);
  for (std::size_t t = 0; t < params.size(); ++t) {
    Matrix& p = *params.tensors[t];
    Matrix& v = state.velocity[t];
    const Matrix& g = grads[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g.data[i] + state.weight_decay * p.data[i];
      v.data[i] = state.momentum * v.data[i] + gi;
      p.data[i] -= state.learning_rate * v.data[i];
    }
  }
}

AdamState AdamState::for_params(const ParamSet& params, double lr) {
  AdamState s;
  s.learning_rate = lr;
  s.moment1 = zeros_like(params);
  s.moment2 = zeros_like(params);
  return s;
}

void adam_step(ParamSet& params, const std::vector<Matrix>& grads, AdamState& state) {
  check_grads(params, grads, state.moment1);
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.size(); ++t) {
    Matrix& p = *params.tensors[t];
    Matrix& m = state.moment1[t];
    Matrix& v = state.moment2[t];
    const Matrix& g = grads[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g.data[i];
      m.data[i] = state.beta1 * m.data[i] + (1.0 - state.beta1) * gi;
      v.data[i] = state.beta2 * v.data[i] + (1.0 - state.beta2) * gi * gi;
      const double mhat = m.data[i] / bc1;
      const double vhat = v.data[i] / bc2;
      p.data[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

double CosineSchedule::at(std::size_t step) const {
  if (step > total_steps)
    throw std::out_of_range("CosineSchedule: step " + std::to_string(step) +
                            " past total " + std::to_string(total_steps));
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_min + 0.5 * (lr_init - lr_min) * (1.0 + std::cos(3.14159265358979323846 * frac));
}

}  // namespace ctclab
