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

#include "ctclab/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ctclab/rng.hpp"

namespace ctclab {

namespace {

// Orthonormal rows via modified Gram-Schmidt on seeded Gaussian draws.
// Result maps a latent row vector to its mixed image: part = z * M.
Matrix orthonormal_mixing(std::size_t latent_dim, std::size_t out_dim, Rng& rng) {
  if (latent_dim > out_dim)
    throw std::invalid_argument("orthonormal_mixing: latent dim exceeds output dim");
  Matrix m(latent_dim, out_dim);
  for (double& v : m.data) v = rng.normal();
  for (std::size_t i = 0; i < latent_dim; ++i) {
    double* row = m.row(i);
    for (std::size_t p = 0; p < i; ++p) {
      const double* prev = m.row(p);
      const double proj = dot(row, prev, out_dim);
      for (std::size_t j = 0; j < out_dim; ++j) row[j] -= proj * prev[j];
    }
    const double norm = std::sqrt(dot(row, row, out_dim));
    if (!(norm > 1e-12)) throw std::runtime_error("orthonormal_mixing: degenerate draw");
    for (std::size_t j = 0; j < out_dim; ++j) row[j] /= norm;
  }
  return m;
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.normal();
  return m;
}

// argmax class and top-2 score gap for one latent row under a partition
// whose scores are (partition_c . latent) / sqrt(dim).
std::pair<int, double> classify(const Matrix& partition, const double* latent) {
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(partition.cols));
  int arg = 0;
  double best = -HUGE_VAL, second = -HUGE_VAL;
  for (std::size_t c = 0; c < partition.rows; ++c) {
    const double s = dot(partition.row(c), latent, partition.cols) * inv_sqrt;
    if (s > best) {
      second = best;
      best = s;
      arg = static_cast<int>(c);
    } else if (s > second) {
      second = s;
    }
  }
  return {arg, partition.rows > 1 ? best - second : HUGE_VAL};
}

struct SourcePartition {
  const Matrix& shared;
  const Matrix& priv;
  double shared_weight;

  std::pair<int, double> classify(const double* z, const double* zp) const {
    const double ws = shared_weight / std::sqrt(static_cast<double>(shared.cols));
    const double wp = 1.0 / std::sqrt(static_cast<double>(priv.cols));
    int arg = 0;
    double best = -HUGE_VAL, second = -HUGE_VAL;
    for (std::size_t c = 0; c < shared.rows; ++c) {
      const double s = ws * dot(shared.row(c), z, shared.cols) +
                       wp * dot(priv.row(c), zp, priv.cols);
      if (s > best) {
        second = best;
        best = s;
        arg = static_cast<int>(c);
      } else if (s > second) {
        second = s;
      }
    }
    return {arg, shared.rows > 1 ? best - second : HUGE_VAL};
  }
};

std::string csv_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_cell(const std::string& cell, std::size_t line, const std::string& path) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end)
    throw std::runtime_error(path + ": non-numeric cell '" + cell + "' at line " +
                             std::to_string(line));
  return value;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

void SharedPatternSpec::validate() const {
  if (shared_dim < 1 || source_private_dim < 1 || target_private_dim < 1)
    throw std::invalid_argument("SharedPatternSpec: all latent dims must be >= 1");
  if (source_classes < 2 || target_classes < 2)
    throw std::invalid_argument("SharedPatternSpec: class counts must be >= 2");
  if (train_samples < 1 || test_samples < 1)
    throw std::invalid_argument("SharedPatternSpec: sample counts must be >= 1");
  if (noise_std < 0.0) throw std::invalid_argument("SharedPatternSpec: noise_std must be >= 0");
  if (label_margin < 0.0) throw std::invalid_argument("SharedPatternSpec: label_margin must be >= 0");
  if (shared_label_weight < 0.0)
    throw std::invalid_argument("SharedPatternSpec: shared_label_weight must be >= 0");
  const std::size_t half = ambient_dim / 2;
  if (half < shared_dim || ambient_dim - half < std::max(source_private_dim, target_private_dim))
    throw std::invalid_argument("SharedPatternSpec: ambient_dim too small for the latent dims");
}

SharedPair gen_shared_pair(const SharedPatternSpec& spec, SharedPairInternals* internals) {
  spec.validate();
  const std::size_t half = spec.ambient_dim / 2;
  const std::size_t rest = spec.ambient_dim - half;

  Rng mix_rng(derive_seed(spec.seed, "mixing"));
  const Matrix mix_src_shared = orthonormal_mixing(spec.shared_dim, half, mix_rng);
  const Matrix mix_src_private = orthonormal_mixing(spec.source_private_dim, rest, mix_rng);
  const Matrix mix_tgt_shared = orthonormal_mixing(spec.shared_dim, half, mix_rng);
  const Matrix mix_tgt_private = orthonormal_mixing(spec.target_private_dim, rest, mix_rng);

  Rng part_rng(derive_seed(spec.seed, "partitions"));
  const Matrix src_part_shared =
      gaussian_matrix(static_cast<std::size_t>(spec.source_classes), spec.shared_dim, part_rng);
  const Matrix src_part_private = gaussian_matrix(static_cast<std::size_t>(spec.source_classes),
                                                  spec.source_private_dim, part_rng);
  const Matrix tgt_part =
      gaussian_matrix(static_cast<std::size_t>(spec.target_classes), spec.shared_dim, part_rng);

  const SourcePartition src_partition{src_part_shared, src_part_private,
                                      spec.shared_label_weight};

  auto build_split = [&](bool is_source, int split_idx, std::size_t count,
                         Matrix* keep_shared, Matrix* keep_private) {
    const std::size_t private_dim =
        is_source ? spec.source_private_dim : spec.target_private_dim;
    const Matrix& mix_shared = is_source ? mix_src_shared : mix_tgt_shared;
    const Matrix& mix_private = is_source ? mix_src_private : mix_tgt_private;

    Rng rng(derive_seed(spec.seed, "samples", is_source ? 0 : 1,
                        static_cast<std::uint64_t>(split_idx)));
    Dataset ds;
    ds.name = is_source ? "source" : "target";
    ds.split = split_idx == 0 ? "train" : "test";
    ds.class_count = is_source ? spec.source_classes : spec.target_classes;
    ds.features = Matrix(count, spec.ambient_dim);
    ds.labels.resize(count);
    if (keep_shared) *keep_shared = Matrix(count, spec.shared_dim);
    if (keep_private) *keep_private = Matrix(count, private_dim);

    std::vector<double> z(spec.shared_dim), zp(private_dim);
    for (std::size_t i = 0; i < count; ++i) {
      int label = 0;
      for (std::size_t attempt = 0;; ++attempt) {
        if (attempt > 100000)
          throw std::runtime_error("gen_shared_pair: label_margin rejects almost all draws");
        for (double& v : z) v = rng.normal();
        for (double& v : zp) v = rng.normal();
        const auto [cls, gap] = is_source ? src_partition.classify(z.data(), zp.data())
                                          : classify(tgt_part, z.data());
        if (gap >= spec.label_margin) {
          label = cls;
          break;
        }
      }
      ds.labels[i] = label;
      double* feat = ds.features.row(i);
      for (std::size_t j = 0; j < half; ++j) {
        double s = 0.0;
        for (std::size_t l = 0; l < spec.shared_dim; ++l) s += z[l] * mix_shared.at(l, j);
        feat[j] = s;
      }
      for (std::size_t j = 0; j < rest; ++j) {
        double s = 0.0;
        for (std::size_t l = 0; l < private_dim; ++l) s += zp[l] * mix_private.at(l, j);
        feat[half + j] = s;
      }
      if (spec.noise_std > 0.0)
        for (std::size_t j = 0; j < spec.ambient_dim; ++j) feat[j] += spec.noise_std * rng.normal();
      if (keep_shared) std::copy(z.begin(), z.end(), keep_shared->row(i));
      if (keep_private) std::copy(zp.begin(), zp.end(), keep_private->row(i));
    }
    return ds;
  };

  SharedPair pair;
  pair.source.train = build_split(true, 0, spec.train_samples, nullptr, nullptr);
  pair.source.test = build_split(true, 1, spec.test_samples, nullptr, nullptr);
  if (internals) {
    pair.target.train = build_split(false, 0, spec.train_samples,
                                    &internals->target_train_shared,
                                    &internals->target_train_private);
    pair.target.test = build_split(false, 1, spec.test_samples,
                                   &internals->target_test_shared,
                                   &internals->target_test_private);
    internals->source_partition_shared = src_part_shared;
    internals->source_partition_private = src_part_private;
    internals->target_partition = tgt_part;
  } else {
    pair.target.train = build_split(false, 0, spec.train_samples, nullptr, nullptr);
    pair.target.test = build_split(false, 1, spec.test_samples, nullptr, nullptr);
  }
  return pair;
}

std::vector<int> target_labels_for(const SharedPairInternals& internals,
                                   const Matrix& shared_latents) {
  std::vector<int> labels(shared_latents.rows);
  for (std::size_t i = 0; i < shared_latents.rows; ++i)
    labels[i] = classify(internals.target_partition, shared_latents.row(i)).first;
  return labels;
}

Dataset load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_matrix_csv: cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  const std::vector<std::string> header = split_line(line);
  if (header.empty() || header[0] != "label")
    throw std::runtime_error(path + ": header must start with 'label' (line 1)");
  const std::size_t feature_count = header.size() - 1;
  if (feature_count == 0) throw std::runtime_error(path + ": header names no features (line 1)");

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != feature_count + 1)
      throw std::runtime_error(path + ": expected " + std::to_string(feature_count + 1) +
                               " columns, got " + std::to_string(cells.size()) + " at line " +
                               std::to_string(line_no));
    const double label_value = parse_cell(cells[0], line_no, path);
    const int label = static_cast<int>(label_value);
    if (label < 0 || static_cast<double>(label) != label_value)
      throw std::runtime_error(path + ": label must be a nonnegative integer at line " +
                               std::to_string(line_no));
    labels.push_back(label);
    for (std::size_t j = 1; j < cells.size(); ++j)
      values.push_back(parse_cell(cells[j], line_no, path));
  }

  Dataset ds;
  ds.features.rows = labels.size();
  ds.features.cols = feature_count;
  ds.features.data = std::move(values);
  ds.labels = std::move(labels);
  int max_label = -1;
  for (int y : ds.labels) max_label = std::max(max_label, y);
  ds.class_count = max_label + 1;
  if (!all_finite(ds.features))
    throw std::runtime_error(path + ": non-finite feature values");
  return ds;
}

void save_matrix_csv(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_matrix_csv: cannot open " + path + " for writing");
  out << "label";
  for (std::size_t j = 0; j < dataset.features.cols; ++j) out << ",f" << j;
  out << "\n";
  for (std::size_t i = 0; i < dataset.features.rows; ++i) {
    out << dataset.labels[i];
    const double* row = dataset.features.row(i);
    for (std::size_t j = 0; j < dataset.features.cols; ++j) out << ',' << csv_double(row[j]);
    out << "\n";
  }
  if (!out) throw std::runtime_error("save_matrix_csv: write failed for " + path);
}

Matrix load_raw_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_raw_csv: cannot open " + path);
  std::vector<double> values;
  std::size_t cols = 0, rows = 0, line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_line(line);
    if (cols == 0) cols = cells.size();
    if (cells.size() != cols)
      throw std::runtime_error(path + ": expected " + std::to_string(cols) +
                               " columns, got " + std::to_string(cells.size()) + " at line " +
                               std::to_string(line_no));
    for (const std::string& c : cells) values.push_back(parse_cell(c, line_no, path));
    ++rows;
  }
  if (rows == 0) throw std::runtime_error(path + ": no data rows");
  Matrix m;
  m.rows = rows;
  m.cols = cols;
  m.data = std::move(values);
  return m;
}

void save_raw_csv(const Matrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_raw_csv: cannot open " + path + " for writing");
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* row = m.row(i);
    for (std::size_t j = 0; j < m.cols; ++j) {
      if (j) out << ',';
      out << csv_double(row[j]);
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("save_raw_csv: write failed for " + path);
}

Matrix augment(const Matrix& batch, double strength, std::uint64_t seed) {
  if (strength < 0.0) throw std::invalid_argument("augment: strength must be >= 0");
  Matrix out = batch;
  if (strength == 0.0) return out;
  Rng rng(derive_seed(seed, "augment"));
  const double drop_rate = std::clamp(strength / 10.0, 0.0, 0.5);
  for (double& v : out.data)
    if (rng.uniform() < drop_rate) v = 0.0;
  for (double& v : out.data) v += strength * rng.normal();
  return out;
}

}  // namespace ctclab
