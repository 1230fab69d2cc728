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

#include "tsbd/training.hpp"

#include <cmath>
#include <string>

#include "tsbd/csv.hpp"

namespace tsbd {

Network init_network(std::uint64_t seed, std::span<const std::size_t> layer_sizes) {
  if (layer_sizes.size() < 2) throw DomainError("init_network: need input and output sizes");
  for (std::size_t s : layer_sizes) {
    if (s == 0) throw DomainError("init_network: zero-width layer");
  }
  Rng rng(derive_seed(seed, 0x1417));
  std::vector<Layer> layers;
  for (std::size_t l = 1; l < layer_sizes.size(); ++l) {
    const std::size_t fan_in = layer_sizes[l - 1];
    const std::size_t fan_out = layer_sizes[l];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Layer layer;
    layer.weights = Tensor2D(fan_out, fan_in);
    for (float& w : layer.weights.values()) {
      w = static_cast<float>(rng.uniform(-bound, bound));
    }
    layer.biases.assign(fan_out, 0.0f);
    layer.activation = l + 1 == layer_sizes.size() ? Activation::kIdentity : Activation::kReLU;
    layers.push_back(std::move(layer));
  }
  return Network(std::move(layers));
}

std::vector<std::vector<std::size_t>> minibatches(std::size_t n, std::size_t batch_size,
                                                  bool shuffle, Rng& rng) {
  if (batch_size == 0) throw DomainError("minibatches: batch size must be >= 1");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (shuffle) rng.shuffle(order);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

TrainResult train(Network net, const LabeledSet& ds, const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw DomainError("train: epochs must be >= 1");
  if (cfg.batch_size < 1) throw DomainError("train: batch size must be >= 1");
  if (!(cfg.lr >= 0.0f)) throw DomainError("train: learning rate must be nonnegative");
  if (ds.size() == 0) throw DomainError("train: empty dataset");
  validate(ds);
  if (ds.features() != net.input_width() || ds.classes != net.output_width()) {
    throw DimensionError("train: dataset shape does not match the network");
  }

  Rng rng(derive_seed(cfg.seed, kMinibatchStream));
  TrainResult result;
  result.loss_trace.reserve(cfg.epochs);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double weighted = 0.0;
    for (const auto& idx : minibatches(ds.size(), cfg.batch_size, cfg.shuffle, rng)) {
      const BackwardResult br = backward(net, make_batch(ds, idx));
      if (!std::isfinite(br.loss) || !all_finite(br.gradients)) {
        throw DivergenceError("train: non-finite loss at epoch " + std::to_string(epoch + 1));
      }
      weighted += br.loss * static_cast<double>(idx.size());
      if (cfg.lr > 0.0f) apply_sgd(net, br.gradients, cfg.lr, Direction::kDescend);
    }
    result.loss_trace.push_back(weighted / static_cast<double>(ds.size()));
  }
  result.net = std::move(net);
  return result;
}

void write_loss_trace_csv(std::span<const double> trace, const std::filesystem::path& path) {
  CsvTable table({"epoch", "mean_loss"});
  for (std::size_t e = 0; e < trace.size(); ++e) {
    table.add_row({format_number(e + 1), format_number(trace[e])});
  }
  table.write(path);
}

}  // namespace tsbd
