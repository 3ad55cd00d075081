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

#include "ctclab/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ctclab {

namespace {

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::ifstream& in, const std::string& path) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw std::runtime_error("load_checkpoint: truncated file " + path);
  return v;
}

void write_matrix(std::ofstream& out, const Matrix& m) {
  write_u32(out, static_cast<std::uint32_t>(m.rows));
  write_u32(out, static_cast<std::uint32_t>(m.cols));
  out.write(reinterpret_cast<const char*>(m.data.data()),
            static_cast<std::streamsize>(m.data.size() * sizeof(double)));
}

Matrix read_matrix(std::ifstream& in, const std::string& path) {
  const std::uint32_t rows = read_u32(in, path);
  const std::uint32_t cols = read_u32(in, path);
  if (rows == 0 || cols == 0 || static_cast<std::uint64_t>(rows) * cols > (1u << 28))
    throw std::runtime_error("load_checkpoint: implausible tensor shape in " + path);
  Matrix m(rows, cols);
  if (!in.read(reinterpret_cast<char*>(m.data.data()),
               static_cast<std::streamsize>(m.data.size() * sizeof(double))))
    throw std::runtime_error("load_checkpoint: truncated tensor data in " + path);
  return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const Mlp& backbone, const LinearHead& head) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path + " for writing");
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  const std::uint32_t flags = backbone.rectify_output ? 1u : 0u;
  write_u32(out, flags);
  write_u32(out, static_cast<std::uint32_t>(backbone.layers.size()));
  for (const DenseLayer& l : backbone.layers) {
    write_matrix(out, l.weight);
    write_matrix(out, l.bias);
  }
  write_matrix(out, head.layer.weight);
  write_matrix(out, head.layer.bias);
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);

  const std::uint32_t flags = read_u32(in, path);
  const std::uint32_t layer_count = read_u32(in, path);
  if (layer_count == 0 || layer_count > 1024)
    throw std::runtime_error("load_checkpoint: implausible layer count in " + path);

  Checkpoint ck;
  ck.backbone.rectify_output = (flags & 1u) != 0;
  ck.backbone.layers.resize(layer_count);
  for (std::uint32_t l = 0; l < layer_count; ++l) {
    ck.backbone.layers[l].weight = read_matrix(in, path);
    ck.backbone.layers[l].bias = read_matrix(in, path);
    if (ck.backbone.layers[l].bias.rows != 1 ||
        ck.backbone.layers[l].bias.cols != ck.backbone.layers[l].weight.cols)
      throw std::runtime_error("load_checkpoint: inconsistent layer shapes in " + path);
    if (l > 0 && ck.backbone.layers[l].weight.rows != ck.backbone.layers[l - 1].weight.cols)
      throw std::runtime_error("load_checkpoint: layer shapes do not chain in " + path);
  }
  ck.head.layer.weight = read_matrix(in, path);
  ck.head.layer.bias = read_matrix(in, path);
  if (ck.head.layer.weight.rows != ck.backbone.layers.back().weight.cols)
    throw std::runtime_error("load_checkpoint: head does not match backbone in " + path);
  return ck;
}

}  // namespace ctclab
