/* Copyright 2026 The VRDial Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "vrdial/nn/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace vrdial::kernels {

namespace serial {

void matvec(const double* w, int rows, int cols, const double* x, double* y) {
  for (int r = 0; r < rows; ++r) {
    const double* wr = w + static_cast<std::size_t>(r) * cols;
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] += acc;
  }
}

void matvec_t(const double* w, int rows, int cols, const double* x, double* y) {
  for (int r = 0; r < rows; ++r) {
    const double* wr = w + static_cast<std::size_t>(r) * cols;
    const double xr = x[r];
    if (xr == 0.0) continue;
    for (int c = 0; c < cols; ++c) y[c] += wr[c] * xr;
  }
}

void matmul_nt(const double* a, const double* b, int n, int m, int k, double* c) {
  for (int i = 0; i < n; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    double* ci = c + static_cast<std::size_t>(i) * m;
    for (int j = 0; j < m; ++j) {
      const double* bj = b + static_cast<std::size_t>(j) * k;
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += ai[t] * bj[t];
      ci[j] += acc;
    }
  }
}

void matmul_nn(const double* g, const double* b, int n, int m, int k, double* c) {
  for (int i = 0; i < n; ++i) {
    const double* gi = g + static_cast<std::size_t>(i) * m;
    double* ci = c + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < m; ++j) {
      const double gij = gi[j];
      if (gij == 0.0) continue;
      const double* bj = b + static_cast<std::size_t>(j) * k;
      for (int t = 0; t < k; ++t) ci[t] += gij * bj[t];
    }
  }
}

void matmul_tn(const double* g, const double* a, int n, int m, int k, double* c) {
  for (int i = 0; i < n; ++i) {
    const double* gi = g + static_cast<std::size_t>(i) * m;
    const double* ai = a + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < m; ++j) {
      const double gij = gi[j];
      if (gij == 0.0) continue;
      double* cj = c + static_cast<std::size_t>(j) * k;
      for (int t = 0; t < k; ++t) cj[t] += gij * ai[t];
    }
  }
}

void add_outer(double* g, int rows, int cols, const double* a, const double* b) {
  for (int r = 0; r < rows; ++r) {
    const double ar = a[r];
    if (ar == 0.0) continue;
    double* gr = g + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) gr[c] += ar * b[c];
  }
}

}  // namespace serial

namespace omp {

// Row-partitioned versions: each thread owns a disjoint block of output rows,
// so results are bitwise identical to the serial reference.

void matvec(const double* w, int rows, int cols, const double* x, double* y) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const double* wr = w + static_cast<std::size_t>(r) * cols;
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] += acc;
  }
}

void matvec_t(const double* w, int rows, int cols, const double* x, double* y) {
  // Partition over output columns; the row loop stays in serial order.
#pragma omp parallel
  {
#ifdef _OPENMP
    const int nt = omp_get_num_threads();
    const int id = omp_get_thread_num();
#else
    const int nt = 1;
    const int id = 0;
#endif
    const int chunk = (cols + nt - 1) / nt;
    const int lo = id * chunk;
    const int hi = lo + chunk < cols ? lo + chunk : cols;
    for (int r = 0; r < rows; ++r) {
      const double xr = x[r];
      if (xr == 0.0) continue;
      const double* wr = w + static_cast<std::size_t>(r) * cols;
      for (int c = lo; c < hi; ++c) y[c] += wr[c] * xr;
    }
  }
}

void matmul_nt(const double* a, const double* b, int n, int m, int k, double* c) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    double* ci = c + static_cast<std::size_t>(i) * m;
    for (int j = 0; j < m; ++j) {
      const double* bj = b + static_cast<std::size_t>(j) * k;
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += ai[t] * bj[t];
      ci[j] += acc;
    }
  }
}

void matmul_nn(const double* g, const double* b, int n, int m, int k, double* c) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const double* gi = g + static_cast<std::size_t>(i) * m;
    double* ci = c + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < m; ++j) {
      const double gij = gi[j];
      if (gij == 0.0) continue;
      const double* bj = b + static_cast<std::size_t>(j) * k;
      for (int t = 0; t < k; ++t) ci[t] += gij * bj[t];
    }
  }
}

void matmul_tn(const double* g, const double* a, int n, int m, int k, double* c) {
#pragma omp parallel for schedule(static)
  for (int j = 0; j < m; ++j) {
    double* cj = c + static_cast<std::size_t>(j) * k;
    for (int i = 0; i < n; ++i) {
      const double gij = g[static_cast<std::size_t>(i) * m + j];
      if (gij == 0.0) continue;
      const double* ai = a + static_cast<std::size_t>(i) * k;
      for (int t = 0; t < k; ++t) cj[t] += gij * ai[t];
    }
  }
}

void add_outer(double* g, int rows, int cols, const double* a, const double* b) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const double ar = a[r];
    if (ar == 0.0) continue;
    double* gr = g + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) gr[c] += ar * b[c];
  }
}

}  // namespace omp

namespace {

bool go_parallel(std::size_t work) {
#ifdef _OPENMP
  return work >= kParallelThreshold && !omp_in_parallel() &&
         omp_get_max_threads() > 1;
#else
  (void)work;
  return false;
#endif
}

std::size_t mul(int a, int b) {
  return static_cast<std::size_t>(a) * static_cast<std::size_t>(b);
}

}  // namespace

void matvec(const double* w, int rows, int cols, const double* x, double* y) {
  if (go_parallel(mul(rows, cols))) {
    omp::matvec(w, rows, cols, x, y);
  } else {
    serial::matvec(w, rows, cols, x, y);
  }
}

void matvec_t(const double* w, int rows, int cols, const double* x, double* y) {
  if (go_parallel(mul(rows, cols))) {
    omp::matvec_t(w, rows, cols, x, y);
  } else {
    serial::matvec_t(w, rows, cols, x, y);
  }
}

void matmul_nt(const double* a, const double* b, int n, int m, int k, double* c) {
  if (go_parallel(mul(n, m) * k)) {
    omp::matmul_nt(a, b, n, m, k, c);
  } else {
    serial::matmul_nt(a, b, n, m, k, c);
  }
}

void matmul_nn(const double* g, const double* b, int n, int m, int k, double* c) {
  if (go_parallel(mul(n, m) * k)) {
    omp::matmul_nn(g, b, n, m, k, c);
  } else {
    serial::matmul_nn(g, b, n, m, k, c);
  }
}

void matmul_tn(const double* g, const double* a, int n, int m, int k, double* c) {
  if (go_parallel(mul(n, m) * k)) {
    omp::matmul_tn(g, a, n, m, k, c);
  } else {
    serial::matmul_tn(g, a, n, m, k, c);
  }
}

void add_outer(double* g, int rows, int cols, const double* a, const double* b) {
  if (go_parallel(mul(rows, cols))) {
    omp::add_outer(g, rows, cols, a, b);
  } else {
    serial::add_outer(g, rows, cols, a, b);
  }
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace vrdial::kernels
