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


#ifndef TSBD_TESTS_FIXTURES_HPP_
#define TSBD_TESTS_FIXTURES_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tsbd/data.hpp"
#include "tsbd/network.hpp"
#include "tsbd/random.hpp"
#include "tsbd/training.hpp"

namespace tsbd::testing {

inline Network random_net(std::uint64_t seed, std::vector<std::size_t> sizes) {
  Network net = init_network(seed, sizes);
  // Nonzero biases so bias gradients and ReLU offsets are exercised.
  Rng rng(derive_seed(seed, 77));
  for (Layer& l : net.layers()) {
    for (float& b : l.biases) b = static_cast<float>(rng.uniform(-0.2, 0.2));
  }
  return net;
}

inline Batch random_batch(std::uint64_t seed, std::size_t n, std::size_t d, std::size_t classes) {
  Rng rng(seed);
  Batch b;
  b.inputs = Tensor2D(n, d);
  for (float& v : b.inputs.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (std::size_t i = 0; i < n; ++i) b.labels.push_back(static_cast<Label>(rng.below(classes)));
  return b;
}

inline LabeledSet labeled_from(const Batch& b, std::size_t classes) {
  LabeledSet ds;
  ds.inputs = b.inputs;
  ds.labels = b.labels;
  ds.original_labels = b.labels;
  ds.poisoned.assign(b.size(), 0);
  ds.classes = classes;
  return ds;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("tsbd_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace tsbd::testing

#endif  // TSBD_TESTS_FIXTURES_HPP_
