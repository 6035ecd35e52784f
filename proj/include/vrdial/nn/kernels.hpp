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

// Dense linear-algebra kernels used by the autodiff tape.
//
// Every kernel exists twice: a plain serial reference in `serial::` and an
// OpenMP version in `omp::`. The unqualified entry points dispatch to the
// OpenMP version only when the problem is large enough and we are not
// already inside a parallel region (the trainer parallelizes over sessions).
// All kernels accumulate into their output (y += ...).

#ifndef VRDIAL_NN_KERNELS_HPP_
#define VRDIAL_NN_KERNELS_HPP_

#include <cstddef>

namespace vrdial::kernels {

namespace serial {

// y[r] += sum_c W[r, c] * x[c]
void matvec(const double* w, int rows, int cols, const double* x, double* y);
// y[c] += sum_r W[r, c] * x[r]
void matvec_t(const double* w, int rows, int cols, const double* x, double* y);
// C[n, m] += sum_k A[n, k] * B[m, k]
void matmul_nt(const double* a, const double* b, int n, int m, int k, double* c);
// C[n, k] += sum_m G[n, m] * B[m, k]
void matmul_nn(const double* g, const double* b, int n, int m, int k, double* c);
// C[m, k] += sum_n G[n, m] * A[n, k]
void matmul_tn(const double* g, const double* a, int n, int m, int k, double* c);
// G[r, c] += a[r] * b[c]
void add_outer(double* g, int rows, int cols, const double* a, const double* b);

}  // namespace serial

namespace omp {

void matvec(const double* w, int rows, int cols, const double* x, double* y);
void matvec_t(const double* w, int rows, int cols, const double* x, double* y);
void matmul_nt(const double* a, const double* b, int n, int m, int k, double* c);
void matmul_nn(const double* g, const double* b, int n, int m, int k, double* c);
void matmul_tn(const double* g, const double* a, int n, int m, int k, double* c);
void add_outer(double* g, int rows, int cols, const double* a, const double* b);

}  // namespace omp

// Work (multiply-adds) above which the dispatching entry points go parallel.
inline constexpr std::size_t kParallelThreshold = std::size_t{1} << 16;

void matvec(const double* w, int rows, int cols, const double* x, double* y);
void matvec_t(const double* w, int rows, int cols, const double* x, double* y);
void matmul_nt(const double* a, const double* b, int n, int m, int k, double* c);
void matmul_nn(const double* g, const double* b, int n, int m, int k, double* c);
void matmul_tn(const double* g, const double* a, int n, int m, int k, double* c);
void add_outer(double* g, int rows, int cols, const double* a, const double* b);

// Number of threads OpenMP would use for a parallel region (1 without OpenMP).
int max_threads();

}  // namespace vrdial::kernels

#endif  // VRDIAL_NN_KERNELS_HPP_
