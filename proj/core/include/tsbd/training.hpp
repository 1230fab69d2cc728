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

#ifndef TSBD_TRAINING_HPP_
#define TSBD_TRAINING_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tsbd/data.hpp"
#include "tsbd/network.hpp"
#include "tsbd/random.hpp"

namespace tsbd {

/// Seed stream for per-epoch shuffles; shared by every SGD-style loop so
/// that runs with equal seeds visit identical mini-batches.
inline constexpr std::uint64_t kMinibatchStream = 0x7AA1;

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  float lr = 0.05f;  // 0 is accepted and leaves parameters untouched
  std::uint64_t seed = 0;
  bool shuffle = true;
};

struct TrainResult {
  Network net;
  std::vector<double> loss_trace;  // sample-weighted mean loss per epoch
};

/// Glorot-uniform weights, zero biases. ReLU on every layer but the last.
Network init_network(std::uint64_t seed, std::span<const std::size_t> layer_sizes);

/// Partitions [0, n) into consecutive mini-batches of `batch_size` (the
/// last may be shorter), after an optional shuffle drawn from `rng`.
std::vector<std::vector<std::size_t>> minibatches(std::size_t n, std::size_t batch_size,
                                                  bool shuffle, Rng& rng);

/// Plain mini-batch SGD on mean cross-entropy. Throws DivergenceError when
/// a loss or gradient becomes non-finite.
TrainResult train(Network net, const LabeledSet& ds, const TrainConfig& cfg);

/// "epoch,mean_loss" CSV with header.
void write_loss_trace_csv(std::span<const double> trace, const std::filesystem::path& path);

}  // namespace tsbd

#endif  // TSBD_TRAINING_HPP_
