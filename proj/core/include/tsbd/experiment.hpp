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


// End-to-end experiment orchestration: in-memory pipeline stages plus the
// command layer that persists artifacts, reports and manifests.

#ifndef TSBD_EXPERIMENT_HPP_
#define TSBD_EXPERIMENT_HPP_

#include <cstddef>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tsbd/config.hpp"
#include "tsbd/data.hpp"
#include "tsbd/defense.hpp"
#include "tsbd/metrics.hpp"
#include "tsbd/network.hpp"

namespace tsbd {

struct Corpus {
  LabeledSet train_clean;  // training split before poisoning
  LabeledSet train;        // poisoned training split
  LabeledSet test;         // clean held-out split
  TriggerSpec trigger;
};

TriggerSpec make_trigger(const ExperimentConfig& cfg);
std::vector<std::size_t> layer_sizes(const ExperimentConfig& cfg);
Corpus build_corpus(const ExperimentConfig& cfg);

struct AttackOutcome {
  Corpus corpus;
  Network backdoored;
  Network clean;  // same init and schedule, trained on the unpoisoned split
  std::vector<double> backdoored_loss;
  std::vector<double> clean_loss;
  DefenseReport backdoored_report;
  DefenseReport clean_report;
};

AttackOutcome run_attack(const ExperimentConfig& cfg);

struct DefendOptions {
  std::optional<ReinitVariant> variant;
  bool no_ft = false;       // fine-tuning epochs forced to 0
  bool vanilla_ft = false;  // alpha forced to 0
  bool per_layer_ranking = false;
};

/// The config after the command-line overrides in `opts`.
ExperimentConfig apply_options(ExperimentConfig cfg, const DefendOptions& opts);
TsbdConfig tsbd_config(const ExperimentConfig& cfg);

std::string attack_run_id(const ExperimentConfig& cfg);
std::string defense_run_id(const ExperimentConfig& cfg, const DefendOptions& opts);

/// The defender's clean subset D_c of the poisoned training split.
LabeledSet defender_subset(const ExperimentConfig& cfg, const LabeledSet& train);

struct DefenseOutcome {
  TsbdResult result;
  DefenseReport report;
};

/// `cfg` is used as given; call apply_options first for flag overrides.
DefenseOutcome run_defense(const ExperimentConfig& cfg, const std::string& run_id,
                           const Network& backdoored, const LabeledSet& train,
                           const LabeledSet& test, const TriggerSpec& trigger,
                           const std::optional<std::filesystem::path>& stage_dir = std::nullopt);

struct CoveragePoint {
  double p = 0.0;
  double ratio = 0.0;
};

struct AnalysisOutcome {
  NwcRecord clean_nwc;
  NwcRecord poison_nwc;
  std::size_t clean_unlearn_steps = 0;
  std::size_t poison_unlearn_steps = 0;
  bool clean_reached_stop = false;
  bool poison_reached_stop = false;
  std::size_t neurons = 0;
  std::optional<double> pearson_all;
  std::vector<std::optional<double>> pearson_per_layer;
  NeuronMap activeness_backdoored;
  NeuronMap activeness_clean;
  NeuronMap tac;
  std::optional<double> spearman_tac_nwc;
  std::vector<CoveragePoint> coverage;  // p = 0.05, 0.10, ..., 0.50
  NeuronMap h_clean;        // backdoored model, clean probe
  NeuronMap h_poison;       // backdoored model, triggered probe
  NeuronMap h_clean_ul;     // clean-unlearned model, clean probe
  NeuronMap h_poison_ul;    // clean-unlearned model, triggered probe
};

AnalysisOutcome run_analysis(const ExperimentConfig& cfg, const Network& backdoored,
                             const Network& clean, const LabeledSet& train,
                             const LabeledSet& test, const TriggerSpec& trigger);

enum class SweepAxis { kNRatio, kMRatio, kPoisoningRatio, kCleanFraction, kFtLr };

/// Throws DomainError for names outside the five sweepable axes.
SweepAxis parse_axis(const std::string& name);
std::string to_string(SweepAxis axis);
std::string config_key(SweepAxis axis);

struct SweepRow {
  double value = 0.0;
  DefenseReport report;
  std::size_t unlearn_steps = 0;
  std::size_t masked_subweights = 0;
};

/// One full defense per value, sorted ascending by value. Runs fan out over
/// `threads` workers; results do not depend on the worker count.
std::vector<SweepRow> run_sweep(const ConfigMap& base, SweepAxis axis, std::vector<double> values,
                                const DefendOptions& opts, std::size_t threads);

/// Worker cap from TSBD_THREADS (unset: hardware concurrency), at least 1
/// and at most `jobs`.
std::size_t worker_count(std::size_t jobs);

// ---------------------------------------------------------------------------
// Commands. Each writes into `out` and finishes with <command>.manifest.json.

struct CommandContext {
  ConfigMap config_map;  // after --seed
  ExperimentConfig cfg;
  std::string config_sha256;  // of the config file bytes
  std::filesystem::path out;
  std::filesystem::path artifacts;  // where input artifacts are read from
};

/// Reads and parses the config file, applying an optional seed override.
CommandContext make_context(const std::filesystem::path& config_path,
                            const std::filesystem::path& out,
                            const std::optional<std::filesystem::path>& artifacts,
                            const std::optional<std::uint64_t>& seed);

void cmd_attack(const CommandContext& ctx);
void cmd_defend(const CommandContext& ctx, const DefendOptions& opts);
void cmd_analyze(const CommandContext& ctx);
void cmd_sweep(const CommandContext& ctx, const std::string& axis,
               const std::vector<double>& values, const DefendOptions& opts);
/// Collects every attack/defense report row under `artifacts` into
/// out/summary.csv, sorted by run id, and returns the rendered table.
std::string cmd_report(const std::filesystem::path& artifacts, const std::filesystem::path& out);

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitStage = 3;
inline constexpr int kExitMissingArtifact = 4;

int exit_code_for(const std::exception& e);

}  // namespace tsbd

#endif  // TSBD_EXPERIMENT_HPP_
