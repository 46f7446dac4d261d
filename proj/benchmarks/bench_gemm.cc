// dsr/bench_gemm.cc

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

#include <benchmark/benchmark.h>

#include "dsr/mat.h"

namespace {

void fill(dsr::Mat* m, dsr::Rng* r) {
  for (auto& v : m->data) v = r->normal();
}

void BM_GemmNN(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  dsr::Rng r(1);
  dsr::Mat a(n, n), b(n, n), c(n, n);
  fill(&a, &r);
  fill(&b, &r);
  for (auto _ : state) {
    c.set_zero();
    dsr::gemm_nn_acc(n, n, n, a.data.data(), n, b.data.data(), n, c.data.data(), n);
    benchmark::DoNotOptimize(c.data.data());
  }
  state.SetItemsProcessed(state.iterations() * 2ll * n * n * n);
}

void BM_GemmNT(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  dsr::Rng r(1);
  dsr::Mat a(n, n), b(n, n), c(n, n);
  fill(&a, &r);
  fill(&b, &r);
  for (auto _ : state) {
    c.set_zero();
    dsr::gemm_nt_acc(n, n, n, a.data.data(), n, b.data.data(), n, c.data.data(), n);
    benchmark::DoNotOptimize(c.data.data());
  }
  state.SetItemsProcessed(state.iterations() * 2ll * n * n * n);
}

void BM_GemmTN(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  dsr::Rng r(1);
  dsr::Mat a(n, n), b(n, n), c(n, n);
  fill(&a, &r);
  fill(&b, &r);
  for (auto _ : state) {
    c.set_zero();
    dsr::gemm_tn_acc(n, n, n, a.data.data(), n, b.data.data(), n, c.data.data(), n);
    benchmark::DoNotOptimize(c.data.data());
  }
  state.SetItemsProcessed(state.iterations() * 2ll * n * n * n);
}

BENCHMARK(BM_GemmNN)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_GemmNT)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_GemmTN)->Arg(64)->Arg(128)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
