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

#include "ctclab/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "ctclab/rng.hpp"

namespace ctclab {

namespace {

DenseLayer make_layer(std::size_t in, std::size_t out) {
  DenseLayer l;
  l.weight = Matrix(in, out);
  l.bias = Matrix(1, out);
  return l;
}

void fill_fan_in_uniform(DenseLayer& l, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(l.weight.rows));
  for (double& v : l.weight.data) v = rng.uniform(-bound, bound);
  for (double& v : l.bias.data) v = rng.uniform(-bound, bound);
}

// y = x * W + b, optionally rectified.
Matrix affine(const Matrix& x, const DenseLayer& l, bool rectify) {
  Matrix y = matmul(x, l.weight);
  for (std::size_t i = 0; i < y.rows; ++i) {
    double* r = y.row(i);
    for (std::size_t j = 0; j < y.cols; ++j) {
      r[j] += l.bias.data[j];
      if (rectify && r[j] < 0.0) r[j] = 0.0;
    }
  }
  return y;
}

}  // namespace

Mlp::Mlp(std::size_t input_dim, const std::vector<std::size_t>& layer_dims,
         bool rectify_output_)
    : rectify_output(rectify_output_) {
  if (layer_dims.empty()) throw std::invalid_argument("Mlp: needs at least one layer");
  std::size_t in = input_dim;
  for (std::size_t out : layer_dims) {
    if (out == 0) throw std::invalid_argument("Mlp: zero-width layer");
    layers.push_back(make_layer(in, out));
    in = out;
  }
}

Mlp Mlp::random_init(std::size_t input_dim, const std::vector<std::size_t>& layer_dims,
                     bool rectify_output, std::uint64_t seed) {
  Mlp net(input_dim, layer_dims, rectify_output);
  Rng rng(derive_seed(seed, "mlp-init"));
  for (DenseLayer& l : net.layers) fill_fan_in_uniform(l, rng);
  return net;
}

std::size_t Mlp::input_dim() const { return layers.front().weight.rows; }
std::size_t Mlp::output_dim() const { return layers.back().weight.cols; }

Matrix Mlp::forward(const Matrix& x) const {
  Cache cache;
  return forward_cached(x, cache);
}

Matrix Mlp::forward_cached(const Matrix& x, Cache& cache) const {
  if (x.cols != input_dim()) {
    throw std::invalid_argument("Mlp::forward: input has " + std::to_string(x.cols) +
                                " columns, expected " + std::to_string(input_dim()));
  }
  cache.post.clear();
  cache.post.reserve(layers.size());
  const Matrix* cur = &x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const bool rectify = rectify_output || l + 1 < layers.size();
    cache.post.push_back(affine(*cur, layers[l], rectify));
    cur = &cache.post.back();
  }
  ensure_finite(*cur, "Mlp forward output");
  return *cur;
}

Mlp::Grads Mlp::backward(const Matrix& x, const Cache& cache, const Matrix& g_out,
                         Matrix* g_input) const {
  if (cache.post.size() != layers.size())
    throw std::invalid_argument("Mlp::backward: cache does not match network");
  require_shape(g_out, cache.post.back().rows, output_dim(), "Mlp::backward upstream");

  Grads grads;
  grads.weight.resize(layers.size());
  grads.bias.resize(layers.size());

  Matrix g = g_out;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const bool rectified = rectify_output || l + 1 < layers.size();
    if (rectified) {
      const Matrix& post = cache.post[l];
      for (std::size_t i = 0; i < g.size(); ++i)
        if (post.data[i] <= 0.0) g.data[i] = 0.0;
    }
    const Matrix& layer_in = (l == 0) ? x : cache.post[l - 1];
    grads.weight[l] = matmul_at(layer_in, g);
    grads.bias[l] = column_sums(g);
    if (l > 0 || g_input != nullptr) {
      Matrix g_prev = matmul_bt(g, layers[l].weight);
      if (l == 0) {
        *g_input = std::move(g_prev);
      } else {
        g = std::move(g_prev);
      }
    }
  }
  return grads;
}

LinearHead LinearHead::random_init(std::size_t rep_dim, std::size_t class_count,
                                   std::uint64_t seed) {
  LinearHead head;
  head.layer = make_layer(rep_dim, class_count);
  Rng rng(derive_seed(seed, "head-init"));
  fill_fan_in_uniform(head.layer, rng);
  return head;
}

Matrix LinearHead::forward(const Matrix& reps) const {
  if (reps.cols != rep_dim()) {
    throw std::invalid_argument("LinearHead::forward: reps have " + std::to_string(reps.cols) +
                                " columns, expected " + std::to_string(rep_dim()));
  }
  return affine(reps, layer, /*rectify=*/false);
}

void forward(const Mlp& backbone, const LinearHead& head, const Matrix& x,
             Matrix& reps, Matrix& logits) {
  reps = backbone.forward(x);
  logits = head.forward(reps);
}

ModelGrads backward(const Mlp& backbone, const LinearHead& head, const Matrix& x,
                    const Matrix& g_reps, const Matrix& g_logits) {
  Mlp::Cache cache;
  const Matrix reps = backbone.forward_cached(x, cache);
  require_shape(g_logits, reps.rows, head.class_count(), "backward g_logits");

  ModelGrads out;
  out.head_weight = matmul_at(reps, g_logits);
  out.head_bias = column_sums(g_logits);

  Matrix g_rep_total = matmul_bt(g_logits, head.layer.weight);
  if (g_reps.size() != 0) {
    require_shape(g_reps, reps.rows, reps.cols, "backward g_reps");
    add_in_place(g_rep_total, g_reps);
  }
  out.backbone = backbone.backward(x, cache, g_rep_total);
  return out;
}

ParamSet collect_params(Mlp& backbone, LinearHead* head) {
  ParamSet ps;
  for (std::size_t l = 0; l < backbone.layers.size(); ++l) {
    ps.tensors.push_back(&backbone.layers[l].weight);
    ps.names.push_back("layer" + std::to_string(l) + ".weight");
    ps.tensors.push_back(&backbone.layers[l].bias);
    ps.names.push_back("layer" + std::to_string(l) + ".bias");
  }
  if (head != nullptr) {
    ps.tensors.push_back(&head->layer.weight);
    ps.names.push_back("head.weight");
    ps.tensors.push_back(&head->layer.bias);
    ps.names.push_back("head.bias");
  }
  return ps;
}

std::vector<Matrix> grads_in_param_order(const ModelGrads& g, bool with_head) {
  std::vector<Matrix> out;
  for (std::size_t l = 0; l < g.backbone.weight.size(); ++l) {
    out.push_back(g.backbone.weight[l]);
    out.push_back(g.backbone.bias[l]);
  }
  if (with_head) {
    out.push_back(g.head_weight);
    out.push_back(g.head_bias);
  }
  return out;
}

}  // namespace ctclab
