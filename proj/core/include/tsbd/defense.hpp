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

// Two-stage backdoor defense.
//
// Stage one ascends the loss on the defender's clean subset until clean
// accuracy collapses, measures how far every hidden neuron's weight row
// moved (the neuron weight change, NWC), and zeroes the most-moved
// subweights of the top-NWC neurons in the *original* model. Stage two
// fine-tunes the zeroed model on the clean subset with a gradient-norm
// penalty, using the two-gradient approximation
//
//   g = (1 - alpha) * grad L(theta) + alpha * grad L(theta + r * g1 / |g1|)
//
// whose implied penalty coefficient is lambda = alpha * r.

#ifndef TSBD_DEFENSE_HPP_
#define TSBD_DEFENSE_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsbd/data.hpp"
#include "tsbd/network.hpp"
#include "tsbd/neurons.hpp"

namespace tsbd {

// ---------------------------------------------------------------------------
// Unlearning

struct UnlearnConfig {
  float lr = 1e-4f;
  double stop_accuracy = 0.10;
  std::size_t max_steps = 5000;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

struct UnlearnResult {
  Network net;
  std::size_t steps = 0;
  /// Accuracy on the unlearning data: initial value, then once per epoch.
  std::vector<double> accuracy_trace;
  bool reached_stop = false;
};

/// Gradient ascent on mean cross-entropy over `data` (labels as given).
/// Checks accuracy after every epoch and returns the first network at or
/// below `stop_accuracy`, or the network after `max_steps` steps.
UnlearnResult unlearn(Network net, const LabeledSet& data, const UnlearnConfig& cfg);

// ---------------------------------------------------------------------------
// Neuron weight change

struct NwcRecord {
  /// Sum of |after - before| over each hidden neuron's weight row.
  NeuronMap nwc;
  /// |after - before| per weight entry, one tensor per hidden layer.
  std::vector<Tensor2D> subweight_change;
};

/// Hidden layers only; biases do not contribute.
NwcRecord compute_nwc(const Network& before, const Network& after);

void write_nwc_csv(const NwcRecord& record, const std::filesystem::path& path);

// "TSNW" | u32 version | u32 layers | per layer: u32 rows | u32 cols | f32 values
inline constexpr std::uint32_t kSubweightFileVersion = 1;
std::vector<std::uint8_t> encode_subweight_changes(std::span<const Tensor2D> tensors);
std::vector<Tensor2D> decode_subweight_changes(std::span<const std::uint8_t> bytes);
void save_subweight_changes(const NwcRecord& record, const std::filesystem::path& path);
std::vector<Tensor2D> load_subweight_changes(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Zero reinitialization

/// V1 zeroes whole selected rows; V2 the top m of each selected row; V3 the
/// top m of all selected subweights pooled together.
enum class ReinitVariant { kV1, kV2, kV3 };

/// Global ranks every hidden neuron together; per-layer takes the top n of
/// each hidden layer separately.
enum class RankingScope { kGlobal, kPerLayer };

struct LayerMask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> bits;  // row-major, 1 = zero this entry

  bool at(std::size_t r, std::size_t c) const { return bits[r * cols + c] != 0; }
  std::size_t true_count() const;
  bool operator==(const LayerMask&) const = default;
};

struct ReinitMask {
  std::vector<LayerMask> layers;  // one per hidden layer
  std::vector<NeuronId> selected_neurons;

  std::size_t true_count() const;
  bool operator==(const ReinitMask&) const = default;
};

/// Selects ceil(n_ratio * neurons) top-NWC neurons and masks their
/// most-changed subweights per `variant`. Ties resolve by ascending
/// (layer, neuron, subweight). n_ratio = 0 selects nothing.
ReinitMask select_reinit_mask(const NwcRecord& record, double n_ratio, double m_ratio,
                              ReinitVariant variant,
                              RankingScope scope = RankingScope::kGlobal);

/// Masked entries become exactly +0.0f; every other parameter is untouched.
Network zero_reinit(Network net, const ReinitMask& mask);

// ---------------------------------------------------------------------------
// Activeness-aware fine-tuning

using FlatGradientFn = std::function<std::vector<float>(std::span<const float>)>;

/// The two-gradient combination on a flat parameter vector, for any loss
/// whose gradient `grad` evaluates. Returns the first gradient untouched
/// when alpha == 0 or its norm is below 1e-12.
std::vector<float> regulated_gradient(std::span<const float> theta, const FlatGradientFn& grad,
                                      double r, double alpha);

struct RegulatedGradient {
  Gradients gradients;
  double loss = 0.0;  // cross-entropy at the unperturbed parameters
};

RegulatedGradient regulated_grad(const Network& net, const Batch& batch, double r, double alpha);

struct FtConfig {
  float lr = 1e-2f;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double r = 0.05;
  double alpha = 0.7;
  std::uint64_t seed = 0;

  double lambda() const noexcept { return alpha * r; }
};

struct FtResult {
  Network net;
  std::size_t steps = 0;
  std::vector<double> loss_trace;  // sample-weighted mean loss per epoch
};

/// Mini-batch descent along regulated_grad. With alpha == 0 this is plain
/// SGD and reproduces train() with the same seed, batch size and lr.
FtResult activeness_ft(Network net, const LabeledSet& data, const FtConfig& cfg);

// ---------------------------------------------------------------------------
// Full pipeline

struct TsbdConfig {
  UnlearnConfig unlearn;
  FtConfig ft;
  double n_ratio = 0.15;
  double m_ratio = 0.7;
  ReinitVariant variant = ReinitVariant::kV3;
  RankingScope scope = RankingScope::kGlobal;
  /// When set, each stage's network is saved here before the next starts.
  std::optional<std::filesystem::path> stage_dir;
};

struct TsbdResult {
  Network unlearned;
  Network reinitialized;
  Network defended;
  NwcRecord nwc;
  ReinitMask mask;
  std::size_t unlearn_steps = 0;
  bool unlearn_reached_stop = false;
  std::vector<double> unlearn_accuracy_trace;
  std::size_t ft_steps = 0;
  std::vector<double> ft_loss_trace;
};

/// unlearn -> compute_nwc -> select_reinit_mask -> zero_reinit ->
/// activeness_ft. Failures surface as StageError naming the stage.
TsbdResult tsbd_run(const Network& backdoored, const LabeledSet& clean, const TsbdConfig& cfg);

std::string to_string(ReinitVariant v);
ReinitVariant parse_variant(const std::string& s);

}  // namespace tsbd

#endif  // TSBD_DEFENSE_HPP_
