// dsr/mat.h

// Copyright 2026  The DSR Toolkit Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef DSR_MAT_H_
#define DSR_MAT_H_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "dsr/common.h"

namespace dsr {

// Dense row-major double matrix. Everything numeric in the toolkit runs in
// double so analytic gradients can be checked against finite differences at
// tight tolerances.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  double* row(int i) { return data.data() + static_cast<size_t>(i) * cols; }
  const double* row(int i) const { return data.data() + static_cast<size_t>(i) * cols; }
  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  size_t size() const { return data.size(); }
  void set_zero() { std::fill(data.begin(), data.end(), 0.0); }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

// The three accumulate-form matrix kernels below carry the entire hot path
// (linear layers, convolutions as shifted products, attention). Leading
// strides let attention heads address column sub-blocks in place.

// C[m x n] += A[m x k] * B[k x n]
inline void gemm_nn_acc(int m, int k, int n, const double* A, int lda,
                        const double* B, int ldb, double* C, int ldc) {
  for (int i = 0; i < m; ++i) {
    const double* a = A + static_cast<size_t>(i) * lda;
    double* c = C + static_cast<size_t>(i) * ldc;
    for (int p = 0; p < k; ++p) {
      const double av = a[p];
      const double* b = B + static_cast<size_t>(p) * ldb;
      for (int j = 0; j < n; ++j) c[j] += av * b[j];
    }
  }
}

// C[m x n] += A[m x k] * B^T, with B stored [n x k]
inline void gemm_nt_acc(int m, int k, int n, const double* A, int lda,
                        const double* B, int ldb, double* C, int ldc) {
  for (int i = 0; i < m; ++i) {
    const double* a = A + static_cast<size_t>(i) * lda;
    double* c = C + static_cast<size_t>(i) * ldc;
    for (int j = 0; j < n; ++j) {
      const double* b = B + static_cast<size_t>(j) * ldb;
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += a[p] * b[p];
      c[j] += s;
    }
  }
}

// C[k x n] += A^T * B, with A stored [m x k], B stored [m x n]
inline void gemm_tn_acc(int m, int k, int n, const double* A, int lda,
                        const double* B, int ldb, double* C, int ldc) {
  for (int i = 0; i < m; ++i) {
    const double* a = A + static_cast<size_t>(i) * lda;
    const double* b = B + static_cast<size_t>(i) * ldb;
    for (int p = 0; p < k; ++p) {
      const double av = a[p];
      double* c = C + static_cast<size_t>(p) * ldc;
      for (int j = 0; j < n; ++j) c[j] += av * b[j];
    }
  }
}

inline void matmul_nn(const Mat& a, const Mat& b, Mat* c) {
  DSR_REQUIRE(a.cols == b.rows && c->rows == a.rows && c->cols == b.cols,
              "matmul_nn: shape mismatch");
  c->set_zero();
  gemm_nn_acc(a.rows, a.cols, b.cols, a.data.data(), a.cols, b.data.data(), b.cols,
              c->data.data(), c->cols);
}

// Numerically-stable in-place row softmax.
inline void softmax_row(double* x, int n) {
  double mx = x[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  double z = 0.0;
  for (int i = 0; i < n; ++i) {
    x[i] = std::exp(x[i] - mx);
    z += x[i];
  }
  const double inv = 1.0 / z;
  for (int i = 0; i < n; ++i) x[i] *= inv;
}

inline void softmax_rows(Mat* m) {
  for (int i = 0; i < m->rows; ++i) softmax_row(m->row(i), m->cols);
}

// In-place log-softmax per row.
inline void log_softmax_row(double* x, int n) {
  double mx = x[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  double z = 0.0;
  for (int i = 0; i < n; ++i) z += std::exp(x[i] - mx);
  const double lse = mx + std::log(z);
  for (int i = 0; i < n; ++i) x[i] -= lse;
}

// Solves A X = B for X (A square n x n, B n x m) by Gauss-Jordan elimination
// with partial pivoting. Small systems only (codec equalizer fits and the
// like); throws on singular A.
inline Mat solve_linear(Mat a, Mat b) {
  DSR_REQUIRE(a.rows == a.cols && a.rows == b.rows, "solve_linear: shape mismatch");
  const int n = a.rows;
  double scale = 0.0;
  for (double v : a.data) scale = std::max(scale, std::abs(v));
  DSR_REQUIRE(scale > 0.0, "solve_linear: zero matrix");
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a.at(r, col)) > std::abs(a.at(pivot, col))) pivot = r;
    DSR_REQUIRE(std::abs(a.at(pivot, col)) > 1e-12 * scale, "solve_linear: singular matrix");
    if (pivot != col) {
      for (int c = 0; c < n; ++c) std::swap(a.at(pivot, c), a.at(col, c));
      for (int c = 0; c < b.cols; ++c) std::swap(b.at(pivot, c), b.at(col, c));
    }
    const double inv = 1.0 / a.at(col, col);
    for (int c = 0; c < n; ++c) a.at(col, c) *= inv;
    for (int c = 0; c < b.cols; ++c) b.at(col, c) *= inv;
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a.at(r, col);
      if (f == 0.0) continue;
      for (int c = 0; c < n; ++c) a.at(r, c) -= f * a.at(col, c);
      for (int c = 0; c < b.cols; ++c) b.at(r, c) -= f * b.at(col, c);
    }
  }
  return b;
}

}  // namespace dsr

#endif  // DSR_MAT_H_
