// Copyright 2026 The intentfuse Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include "intentfuse/autodiff.h"
#include "intentfuse/rng.h"
#include "intentfuse/tensor.h"

namespace {

using intentfuse::RngStream;
using intentfuse::Tensor;
namespace ad = intentfuse::ad;

Tensor random_tensor(std::size_t r, std::size_t c, RngStream& rng) {
  Tensor t = Tensor::zeros(r, c);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  RngStream rng(1, "bench");
  Tensor a = random_tensor(256, n, rng);
  Tensor b = random_tensor(n, n, rng);
  Tensor out = Tensor::zeros(256, n);
  for (auto _ : state) {
    intentfuse::matmul_into(a, false, b, false, out, 0.0);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * 256 * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_RngNormal(benchmark::State& state) {
  RngStream rng(1, "bench");
  double acc = 0;
  for (auto _ : state) acc += rng.normal();
  benchmark::DoNotOptimize(acc);
}
BENCHMARK(BM_RngNormal);

}  // namespace

BENCHMARK_MAIN();
