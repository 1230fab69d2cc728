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

// Synthetic grid corpus, patch/blend triggers, dataset poisoning and the
// defender's clean subset.

#ifndef TSBD_DATA_HPP_
#define TSBD_DATA_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "tsbd/network.hpp"

namespace tsbd {

/// Solid rectangle stamped onto a grid_rows x grid_cols feature grid.
struct PatchTrigger {
  std::size_t grid_rows = 8;
  std::size_t grid_cols = 8;
  std::size_t row = 6;
  std::size_t col = 6;
  std::size_t height = 2;
  std::size_t width = 2;
  float fill = 1.0f;
};

/// x' = (1 - ratio) * x + ratio * pattern.
struct BlendTrigger {
  std::vector<float> pattern;
  float ratio = 0.2f;
};

using TriggerSpec = std::variant<PatchTrigger, BlendTrigger>;

/// 2x2 white patch in the bottom-right corner of the grid.
PatchTrigger default_patch_trigger(std::size_t grid_rows = 8, std::size_t grid_cols = 8);

/// Full-grid pseudo-random pattern keyed by `pattern_seed`.
BlendTrigger default_blend_trigger(std::uint64_t pattern_seed, std::size_t features,
                                   float ratio = 0.2f);

/// Throws DomainError when the trigger cannot apply to `features`-wide inputs.
void validate_trigger(const TriggerSpec& trigger, std::size_t features);

void apply_trigger_inplace(std::span<float> x, const TriggerSpec& trigger);
std::vector<float> apply_trigger(std::span<const float> x, const TriggerSpec& trigger);

struct LabeledSet {
  Tensor2D inputs;  // samples x features, entries in [0, 1]
  std::vector<Label> labels;
  std::vector<std::uint8_t> poisoned;
  std::vector<Label> original_labels;
  std::size_t classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t features() const noexcept { return inputs.cols(); }
  std::size_t poisoned_count() const;

  bool operator==(const LabeledSet&) const = default;
};

/// Throws DimensionError/DomainError when the parallel arrays disagree.
void validate(const LabeledSet& ds);

struct SyntheticConfig {
  std::uint64_t seed = 1;
  std::size_t classes = 10;
  std::size_t per_class = 500;
  std::size_t grid_rows = 8;
  std::size_t grid_cols = 8;
  double noise = 0.15;
};

/// Fixed template for class `c`: depends on c and the grid shape only.
std::vector<float> class_template(std::size_t c, std::size_t grid_rows, std::size_t grid_cols);

/// classes x per_class samples, interleaved by class (sample j has class
/// j mod classes): template plus N(0, noise^2), clamped to [0, 1].
LabeledSet gen_synthetic(const SyntheticConfig& cfg);

struct PoisonConfig {
  double poisoning_ratio = 0.1;
  Label target_label = 0;
  TriggerSpec trigger = PatchTrigger{};
  std::uint64_t seed = 0;
};

/// Stamps the trigger on floor(ratio * N) uniformly chosen samples and
/// relabels them to the target; order and N are preserved.
LabeledSet poison_dataset(const LabeledSet& ds, const PoisonConfig& cfg);

enum class SubsetSampling {
  /// Uniform over all unpoisoned entries.
  kUniform,
  /// floor(k / C) per class (uniform within the class), the remainder and
  /// any per-class shortfall drawn uniformly from what is left.
  kClassBalanced,
};

/// floor(fraction * N) samples drawn without replacement from the
/// unpoisoned entries, in original order.
LabeledSet clean_subset(const LabeledSet& ds, double fraction, std::uint64_t seed,
                        SubsetSampling sampling = SubsetSampling::kUniform);

/// Seeded split into (train, test) with floor(test_fraction * N) test samples.
std::pair<LabeledSet, LabeledSet> split_dataset(const LabeledSet& ds, double test_fraction,
                                                std::uint64_t seed);

LabeledSet select(const LabeledSet& ds, std::span<const std::size_t> indices);
Batch make_batch(const LabeledSet& ds, std::span<const std::size_t> indices);
Batch full_batch(const LabeledSet& ds);

/// Triggered copy of every sample whose label differs from `target`,
/// relabeled to `target`. This is the data poison unlearning ascends on.
LabeledSet triggered_copy(const LabeledSet& ds, const TriggerSpec& trigger, Label target);

/// floor(ratio * n) with a guard against representation error.
std::size_t fraction_count(double ratio, std::size_t n);

// "TSDS" | u32 version | u32 N | u32 d | u32 C |
//   per sample: d f32 | u16 label | u8 poisoned | u16 original label
inline constexpr std::uint32_t kDatasetVersion = 1;
std::vector<std::uint8_t> encode_dataset(const LabeledSet& ds);
LabeledSet decode_dataset(std::span<const std::uint8_t> bytes);
void save_dataset(const LabeledSet& ds, const std::filesystem::path& path);
LabeledSet load_dataset(const std::filesystem::path& path);

}  // namespace tsbd

#endif  // TSBD_DATA_HPP_
