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

#ifndef TSBD_NEURONS_HPP_
#define TSBD_NEURONS_HPP_

#include <compare>
#include <cstddef>
#include <vector>

namespace tsbd {

/// (layer, neuron) address of a hidden unit.
struct NeuronId {
  std::size_t layer = 0;
  std::size_t neuron = 0;

  auto operator<=>(const NeuronId&) const = default;
};

/// One value per hidden neuron, indexed [layer][neuron].
using NeuronMap = std::vector<std::vector<double>>;

std::size_t neuron_count(const NeuronMap& values);

/// All values in (layer, neuron) order.
std::vector<double> flatten_neurons(const NeuronMap& values);

/// Neurons sorted by value descending; ties by ascending (layer, neuron).
std::vector<NeuronId> rank_descending(const NeuronMap& values);

/// Restricts a map to a single layer, keeping the layer index.
std::vector<NeuronId> rank_descending_in_layer(const NeuronMap& values, std::size_t layer);

}  // namespace tsbd

#endif  // TSBD_NEURONS_HPP_
