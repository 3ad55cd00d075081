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

struct DenseLayer {
  Matrix weight;  // in x out
  Matrix bias;    // 1 x out
};

// Fully-connected rectifier network. The map input -> output is
// deterministic: no stochastic layers, no batch statistics. When
// `rectify_output` is set the rectifier is applied after every layer,
// including the last one (the representation is a post-rectifier vector,
// as with pooled backbone features); otherwise the last layer is affine,
// which is what a scalar-valued statistics network needs.
class Mlp {
 public:
  struct Cache {
    std::vector<Matrix> post;  // post-activation output of each layer
  };
  struct Grads {
    std::vector<Matrix> weight;
    std::vector<Matrix> bias;
  };

  Mlp() = default;
  Mlp(std::size_t input_dim, const std::vector<std::size_t>& layer_dims,
      bool rectify_output = true);

  // Uniform fan-in init: every weight and bias of a layer is drawn from
  // U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static Mlp random_init(std::size_t input_dim, const std::vector<std::size_t>& layer_dims,
                         bool rectify_output, std::uint64_t seed);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t layer_count() const { return layers.size(); }

  Matrix forward(const Matrix& x) const;
  Matrix forward_cached(const Matrix& x, Cache& cache) const;

  // Backpropagates g_out (d loss / d output) through the cached forward
  // pass. Fills per-layer parameter gradients; g_input, when given,
  // receives d loss / d x.
  Grads backward(const Matrix& x, const Cache& cache, const Matrix& g_out,
                 Matrix* g_input = nullptr) const;

  std::vector<DenseLayer> layers;
  bool rectify_output = true;
};

struct LinearHead {
  DenseLayer layer;  // weight: rep_dim x classes

  static LinearHead random_init(std::size_t rep_dim, std::size_t class_count,
                                std::uint64_t seed);

  std::size_t rep_dim() const { return layer.weight.rows; }
  std::size_t class_count() const { return layer.weight.cols; }

  Matrix forward(const Matrix& reps) const;
};

struct ModelGrads {
  Mlp::Grads backbone;
  Matrix head_weight;
  Matrix head_bias;
};

// reps = backbone(x), logits = head(reps).
void forward(const Mlp& backbone, const LinearHead& head, const Matrix& x,
             Matrix& reps, Matrix& logits);

// Parameter gradients for upstream gradients on both outputs. g_reps may be
// empty (all-zero path) when only the classification loss is active.
ModelGrads backward(const Mlp& backbone, const LinearHead& head, const Matrix& x,
                    const Matrix& g_reps, const Matrix& g_logits);

// Mutable views over every parameter tensor, in a fixed order matching
// grads_in_param_order: layer0.weight, layer0.bias, ..., head.weight, head.bias.
struct ParamSet {
  std::vector<Matrix*> tensors;
  std::vector<std::string> names;
  std::size_t size() const { return tensors.size(); }
};

ParamSet collect_params(Mlp& backbone, LinearHead* head = nullptr);
std::vector<Matrix> grads_in_param_order(const ModelGrads& g, bool with_head = true);

}  // namespace ctclab
