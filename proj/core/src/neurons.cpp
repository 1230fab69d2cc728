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

#include "tsbd/neurons.hpp"

#include <algorithm>

#include "tsbd/errors.hpp"

namespace tsbd {

std::size_t neuron_count(const NeuronMap& values) {
  std::size_t n = 0;
  for (const auto& layer : values) n += layer.size();
  return n;
}

std::vector<double> flatten_neurons(const NeuronMap& values) {
  std::vector<double> out;
  out.reserve(neuron_count(values));
  for (const auto& layer : values) out.insert(out.end(), layer.begin(), layer.end());
  return out;
}

namespace {

void sort_desc(std::vector<NeuronId>& ids, const NeuronMap& values) {
  std::stable_sort(ids.begin(), ids.end(), [&](const NeuronId& a, const NeuronId& b) {
    const double va = values[a.layer][a.neuron];
    const double vb = values[b.layer][b.neuron];
    if (va != vb) return va > vb;
    return a < b;
  });
}

}  // namespace

std::vector<NeuronId> rank_descending(const NeuronMap& values) {
  std::vector<NeuronId> ids;
  ids.reserve(neuron_count(values));
  for (std::size_t l = 0; l < values.size(); ++l) {
    for (std::size_t k = 0; k < values[l].size(); ++k) ids.push_back({l, k});
  }
  sort_desc(ids, values);
  return ids;
}

std::vector<NeuronId> rank_descending_in_layer(const NeuronMap& values, std::size_t layer) {
  if (layer >= values.size()) throw DimensionError("rank_descending_in_layer: no such layer");
  std::vector<NeuronId> ids;
  for (std::size_t k = 0; k < values[layer].size(); ++k) ids.push_back({layer, k});
  sort_desc(ids, values);
  return ids;
}

}  // namespace tsbd
