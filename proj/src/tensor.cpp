// Copyright 2026 The seqdesign Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "seqdesign/tensor.hpp"

#include <algorithm>
#include <stdexcept>

namespace seqdesign {

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.front().size();
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    if (rows[i].size() != c) throw std::invalid_argument("ragged rows in Matrix::from_rows");
    std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  }
  return m;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Matrix::resize(std::size_t rows, std::size_t cols, double fill) {
  rows_ = rows;
  cols_ = cols;
  data_.assign(rows * cols, fill);
}

std::string Matrix::shape_string() const {
  return "[" + std::to_string(rows_) + " x " + std::to_string(cols_) + "]";
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw std::invalid_argument(what + ": expected shape [" + std::to_string(rows) + " x " +
                                std::to_string(cols) + "], got " + m.shape_string());
  }
}

namespace {

// Row i of out depends only on row i of a; the k-loop order is fixed.
void gemm_nn_kernel(const double* __restrict a, const double* __restrict b, double* __restrict out,
                    std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* __restrict o = out + i * m;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = ai[p];
      const double* __restrict bp = b + p * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += s * bp[j];
    }
  }
}

}  // namespace

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("gemm_nn: inner dimension mismatch " + a.shape_string() + " * " +
                                b.shape_string());
  if (!accumulate) out.resize(a.rows(), b.cols());
  require_shape(out, a.rows(), b.cols(), "gemm_nn output");
  gemm_nn_kernel(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.cols());
}

void gemm_tn(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  if (a.rows() != b.rows())
    throw std::invalid_argument("gemm_tn: row mismatch " + a.shape_string() + " vs " +
                                b.shape_string());
  if (!accumulate) out.resize(a.cols(), b.cols());
  require_shape(out, a.cols(), b.cols(), "gemm_tn output");
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  const double* ad = a.data();
  const double* bd = b.data();
  double* od = out.data();
  for (std::size_t r = 0; r < n; ++r) {
    const double* ar = ad + r * k;
    const double* __restrict br = bd + r * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = ar[p];
      if (s == 0.0) continue;
      double* __restrict o = od + p * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += s * br[j];
    }
  }
}

void gemm_nt(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  if (a.cols() != b.cols())
    throw std::invalid_argument("gemm_nt: inner dimension mismatch " + a.shape_string() +
                                " * T" + b.shape_string());
  const Matrix bt = b.transposed();
  gemm_nn(a, bt, out, accumulate);
}

void add_inplace(Matrix& dst, const Matrix& src) {
  if (!dst.same_shape(src))
    throw std::invalid_argument("add_inplace: shape mismatch " + dst.shape_string() + " vs " +
                                src.shape_string());
  double* d = dst.data();
  const double* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

void axpy(double alpha, const Matrix& x, Matrix& y) {
  if (!y.same_shape(x)) throw std::invalid_argument("axpy: shape mismatch");
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace seqdesign
