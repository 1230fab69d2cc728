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


// Sort-free reference for neuron and subweight selection.

#ifndef TSBD_TESTS_MASK_ORACLE_HPP_
#define TSBD_TESTS_MASK_ORACLE_HPP_

#include <cstddef>
#include <cstdint>
#include <set>
#include <tuple>
#include <utility>
#include <vector>

#include "tsbd/defense.hpp"
#include "tsbd/random.hpp"

namespace tsbd::testing {

/// Builds a record whose NWC entries are the row sums of `rows`.
inline NwcRecord record_from(std::vector<std::vector<std::vector<float>>> rows) {
  NwcRecord rec;
  for (const auto& layer : rows) {
    const std::size_t cols = layer.empty() ? 0 : layer[0].size();
    Tensor2D t(layer.size(), cols);
    std::vector<double> sums;
    for (std::size_t k = 0; k < layer.size(); ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < cols; ++i) {
        t(k, i) = layer[k][i];
        s += layer[k][i];
      }
      sums.push_back(s);
    }
    rec.nwc.push_back(std::move(sums));
    rec.subweight_change.push_back(std::move(t));
  }
  return rec;
}

// Independent oracle: an element is kept when fewer than `take` elements
// beat it, where "beat" is larger value or equal value at a smaller index.
template <class Key>
std::set<Key> top_by_count(const std::vector<std::pair<double, Key>>& items, std::size_t take) {
  std::set<Key> out;
  for (const auto& [v, key] : items) {
    std::size_t beaten_by = 0;
    for (const auto& [w, other] : items) {
      if (w > v || (w == v && other < key)) ++beaten_by;
    }
    if (beaten_by < take) out.insert(key);
  }
  return out;
}

inline std::size_t oracle_ceil(double ratio, std::size_t n) {
  // Smallest t with t >= ratio * n, searched rather than computed.
  for (std::size_t t = 0; t <= n; ++t) {
    if (static_cast<double>(t) >= ratio * static_cast<double>(n) - 1e-9) return t;
  }
  return n;
}

struct MaskCase {
  NwcRecord record;
  double n_ratio;
  double m_ratio;
};

inline MaskCase random_case(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t layers = 1 + rng.below(3);
  std::size_t fan_in = 1 + rng.below(6);
  std::vector<std::vector<std::vector<float>>> rows;
  const bool coarse = rng.below(2) == 0;  // small integers force ties
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t k = 1 + rng.below(8);
    std::vector<std::vector<float>> layer(k, std::vector<float>(fan_in));
    for (auto& row : layer) {
      for (float& v : row) {
        v = coarse ? static_cast<float>(rng.below(3)) : static_cast<float>(rng.uniform(0.0, 2.0));
      }
    }
    rows.push_back(std::move(layer));
    fan_in = k;
  }
  MaskCase c{record_from(rows), 0.0, 0.0};
  const double grid[] = {0.1, 0.15, 0.25, 0.3, 0.5, 0.7, 1.0};
  c.n_ratio = rng.below(3) == 0 ? grid[rng.below(7)] : rng.uniform(0.01, 1.0);
  c.m_ratio = rng.below(3) == 0 ? grid[rng.below(7)] : rng.uniform(0.01, 1.0);
  return c;
}

using SubKey = std::tuple<std::size_t, std::size_t, std::size_t>;

inline std::set<SubKey> mask_keys(const ReinitMask& m) {
  std::set<SubKey> out;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    for (std::size_t r = 0; r < m.layers[l].rows; ++r) {
      for (std::size_t c = 0; c < m.layers[l].cols; ++c) {
        if (m.layers[l].at(r, c)) out.insert({l, r, c});
      }
    }
  }
  return out;
}

inline std::set<NeuronId> oracle_neurons(const NwcRecord& rec, double n_ratio, RankingScope scope) {
  std::set<NeuronId> out;
  if (scope == RankingScope::kGlobal) {
    std::vector<std::pair<double, NeuronId>> items;
    for (std::size_t l = 0; l < rec.nwc.size(); ++l) {
      for (std::size_t k = 0; k < rec.nwc[l].size(); ++k) items.push_back({rec.nwc[l][k], {l, k}});
    }
    return top_by_count(items, oracle_ceil(n_ratio, items.size()));
  }
  for (std::size_t l = 0; l < rec.nwc.size(); ++l) {
    std::vector<std::pair<double, NeuronId>> items;
    for (std::size_t k = 0; k < rec.nwc[l].size(); ++k) items.push_back({rec.nwc[l][k], {l, k}});
    for (const NeuronId& n : top_by_count(items, oracle_ceil(n_ratio, items.size()))) out.insert(n);
  }
  return out;
}

inline std::set<SubKey> oracle_mask(const NwcRecord& rec, const std::set<NeuronId>& chosen, double m_ratio,
                             ReinitVariant variant) {
  std::set<SubKey> out;
  auto change = [&](const SubKey& k) {
    return static_cast<double>(rec.subweight_change[std::get<0>(k)](std::get<1>(k), std::get<2>(k)));
  };
  if (variant == ReinitVariant::kV1) {
    for (const NeuronId& n : chosen) {
      for (std::size_t i = 0; i < rec.subweight_change[n.layer].cols(); ++i) out.insert({n.layer, n.neuron, i});
    }
  } else if (variant == ReinitVariant::kV2) {
    for (const NeuronId& n : chosen) {
      std::vector<std::pair<double, SubKey>> items;
      const std::size_t cols = rec.subweight_change[n.layer].cols();
      for (std::size_t i = 0; i < cols; ++i) {
        const SubKey k{n.layer, n.neuron, i};
        items.push_back({change(k), k});
      }
      for (const SubKey& k : top_by_count(items, oracle_ceil(m_ratio, cols))) out.insert(k);
    }
  } else {
    std::vector<std::pair<double, SubKey>> items;
    for (const NeuronId& n : chosen) {
      for (std::size_t i = 0; i < rec.subweight_change[n.layer].cols(); ++i) {
        const SubKey k{n.layer, n.neuron, i};
        items.push_back({change(k), k});
      }
    }
    out = top_by_count(items, oracle_ceil(m_ratio, items.size()));
  }
  return out;
}

}  // namespace tsbd::testing

#endif  // TSBD_TESTS_MASK_ORACLE_HPP_
