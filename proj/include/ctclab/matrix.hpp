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

#include <cstddef>
#include <string>
#include <vector>

namespace ctclab {

// Dense row-major 64-bit matrix. All products run single-threaded with a
// fixed reduction order; repeated evaluation is bitwise identical.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // rows * cols, row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }

  std::size_t size() const { return data.size(); }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

// C = A * B
Matrix matmul(const Matrix& a, const Matrix& b);
// C = A^T * B
Matrix matmul_at(const Matrix& a, const Matrix& b);
// C = A * B^T
Matrix matmul_bt(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

void add_in_place(Matrix& dst, const Matrix& src);              // dst += src
void axpy(Matrix& dst, double alpha, const Matrix& src);        // dst += alpha * src
void scale_in_place(Matrix& m, double alpha);

// Column j of the result is the sum of column j over all rows (1 x cols).
Matrix column_sums(const Matrix& m);

double dot(const double* a, const double* b, std::size_t n);

bool all_finite(const Matrix& m);

// Throws std::runtime_error naming `what` if any entry is NaN/Inf.
void ensure_finite(const Matrix& m, const std::string& what);
void ensure_finite(double v, const std::string& what);

// Throws std::invalid_argument when the shapes differ.
void require_shape(const Matrix& m, std::size_t rows, std::size_t cols,
                   const std::string& what);

}  // namespace ctclab
