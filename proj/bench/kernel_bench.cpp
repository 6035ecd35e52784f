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

// Serial reference kernels versus their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <vector>

#include "vrdial/nn/kernels.hpp"
#include "vrdial/nn/random.hpp"

namespace {

std::vector<double> filled(std::size_t n, std::uint64_t seed) {
  vrdial::Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = vrdial::uniform_open(rng) - 0.5;
  return v;
}

template <void (*Kernel)(const double*, const double*, int, int, int, double*)>
void BM_MatmulNT(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto a = filled(static_cast<std::size_t>(n) * n, 1);
  auto b = filled(static_cast<std::size_t>(n) * n, 2);
  std::vector<double> c(static_cast<std::size_t>(n) * n);
  for (auto _ : state) {
    Kernel(a.data(), b.data(), n, n, n, c.data());
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * n * n * n);
}

template <void (*Kernel)(const double*, int, int, const double*, double*)>
void BM_Matvec(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto w = filled(static_cast<std::size_t>(n) * n, 3);
  auto x = filled(n, 4);
  std::vector<double> y(n);
  for (auto _ : state) {
    Kernel(w.data(), n, n, x.data(), y.data());
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}

template <void (*Kernel)(double*, int, int, const double*, const double*)>
void BM_AddOuter(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto a = filled(n, 5);
  auto b = filled(n, 6);
  std::vector<double> g(static_cast<std::size_t>(n) * n);
  for (auto _ : state) {
    Kernel(g.data(), n, n, a.data(), b.data());
    benchmark::DoNotOptimize(g.data());
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}

BENCHMARK_TEMPLATE(BM_MatmulNT, vrdial::kernels::serial::matmul_nt)->Arg(64)->Arg(256);
BENCHMARK_TEMPLATE(BM_MatmulNT, vrdial::kernels::omp::matmul_nt)->Arg(64)->Arg(256);
BENCHMARK_TEMPLATE(BM_Matvec, vrdial::kernels::serial::matvec)->Arg(512)->Arg(2048);
BENCHMARK_TEMPLATE(BM_Matvec, vrdial::kernels::omp::matvec)->Arg(512)->Arg(2048);
BENCHMARK_TEMPLATE(BM_AddOuter, vrdial::kernels::serial::add_outer)->Arg(512)->Arg(2048);
BENCHMARK_TEMPLATE(BM_AddOuter, vrdial::kernels::omp::add_outer)->Arg(512)->Arg(2048);

}  // namespace

BENCHMARK_MAIN();
