// Copyright 2026 The TSBD Lab Authors. All Rights Reserved.
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


// Microbenchmarks for the desk-scale network kernels.

#include <benchmark/benchmark.h>

#include <array>
#include <cstddef>

#include "tsbd/data.hpp"
#include "tsbd/defense.hpp"
#include "tsbd/network.hpp"
#include "tsbd/training.hpp"

namespace {

constexpr std::array<std::size_t, 4> kSizes{64, 64, 32, 10};

tsbd::Batch desk_batch(std::size_t n) {
  tsbd::SyntheticConfig sc;
  sc.per_class = (n + 9) / 10;
  const tsbd::LabeledSet ds = tsbd::gen_synthetic(sc);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return tsbd::make_batch(ds, idx);
}

void BM_Forward(benchmark::State& state) {
  const tsbd::Network net = tsbd::init_network(1, kSizes);
  const tsbd::Batch batch = desk_batch(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(tsbd::forward(net, batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Backward(benchmark::State& state) {
  const tsbd::Network net = tsbd::init_network(1, kSizes);
  const tsbd::Batch batch = desk_batch(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(tsbd::backward(net, batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_RegulatedGrad(benchmark::State& state) {
  const tsbd::Network net = tsbd::init_network(1, kSizes);
  const tsbd::Batch batch = desk_batch(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(tsbd::regulated_grad(net, batch, 0.05, 0.7));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_Forward)->Arg(32)->Arg(256);
BENCHMARK(BM_Backward)->Arg(32)->Arg(256);
BENCHMARK(BM_RegulatedGrad)->Arg(32)->Arg(256);

BENCHMARK_MAIN();
