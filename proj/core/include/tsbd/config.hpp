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


// Experiment configuration: a flat "key = value" text format grouped by
// [section] headers. Every key is required and unknown keys are rejected.

#ifndef TSBD_CONFIG_HPP_
#define TSBD_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tsbd/data.hpp"
#include "tsbd/defense.hpp"
#include "tsbd/training.hpp"

namespace tsbd {

enum class TriggerKind { kPatch, kBlend };

struct ExperimentConfig {
  std::uint64_t seed = 1;

  SyntheticConfig corpus;  // corpus.seed is derived from `seed`
  double test_fraction = 0.2;

  TriggerKind trigger = TriggerKind::kPatch;
  PatchTrigger patch;
  float blend_ratio = 0.2f;
  double poisoning_ratio = 0.1;
  Label target_label = 0;

  std::vector<std::size_t> hidden = {64, 32};
  TrainConfig train;

  double clean_fraction = 0.05;
  SubsetSampling clean_sampling = SubsetSampling::kClassBalanced;

  UnlearnConfig unlearn;
  FtConfig ft;
  double n_ratio = 0.15;
  double m_ratio = 0.7;
  ReinitVariant variant = ReinitVariant::kV3;
  RankingScope scope = RankingScope::kGlobal;

  /// Stop threshold for poison unlearning (accuracy on the relabeled
  /// triggered copy of the clean subset, which equals its ASR).
  double poison_stop_asr = 0.10;
  std::size_t activeness_batch_size = 32;
};

/// "section.key" -> raw value text, in key order.
using ConfigMap = std::map<std::string, std::string>;

/// The full set of recognised keys, in file order.
const std::vector<std::string>& config_keys();

/// Parses the text format. Throws ConfigError naming the offending line
/// for syntax errors, duplicates and unknown keys.
ConfigMap parse_config_map(std::string_view text);

/// Converts and validates every value. Throws ConfigError naming the key.
ExperimentConfig build_config(const ConfigMap& map);

ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// The desk-scale defaults as a ConfigMap, and rendered as config text.
ConfigMap default_config_map();
std::string render_config(const ConfigMap& map);

/// Component seeds, all derived from the run seed.
enum class SeedStream : std::uint64_t {
  kCorpus = 1,
  kSplit,
  kPoison,
  kBlendPattern,
  kInit,
  kTrain,
  kCleanSubset,
  kUnlearn,
  kFinetune,
  kActiveness,
};
std::uint64_t component_seed(const ExperimentConfig& cfg, SeedStream stream);

std::string to_string(TriggerKind kind);

}  // namespace tsbd

#endif  // TSBD_CONFIG_HPP_
