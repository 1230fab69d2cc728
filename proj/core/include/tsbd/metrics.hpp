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

// Evaluation statistics: clean accuracy, attack success rate, defense
// effectiveness rating, trigger-activated change, ranking coverage, gradient
// activeness and activation profiles.

#ifndef TSBD_METRICS_HPP_
#define TSBD_METRICS_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsbd/csv.hpp"
#include "tsbd/data.hpp"
#include "tsbd/network.hpp"
#include "tsbd/neurons.hpp"

namespace tsbd {

/// Fraction of samples whose argmax prediction equals the stored label.
double accuracy(const Network& net, const LabeledSet& test);

/// Over samples whose original label differs from `target`: fraction that
/// the network sends to `target` once the trigger is stamped on.
double asr(const Network& net, const LabeledSet& test, const TriggerSpec& trigger, Label target);

/// [max(0, asr drop) - max(0, acc drop) + 1] / 2, inputs in [0, 1].
double der(double acc_before, double asr_before, double acc_after, double asr_after);

struct DefenseReport {
  std::string run_id;
  std::string attack;
  double acc_before = 0.0;
  double asr_before = 0.0;
  std::optional<double> acc_after;
  std::optional<double> asr_after;
  std::optional<double> der;
};

DefenseReport baseline_report(std::string run_id, std::string attack, double acc, double asr);
DefenseReport defense_report(std::string run_id, std::string attack, double acc_before,
                             double asr_before, double acc_after, double asr_after);

/// run_id,attack,acc_before,asr_before,acc_after,asr_after,der
std::vector<std::string> report_header();
std::vector<std::string> report_fields(const DefenseReport& report);
DefenseReport parse_report_fields(const std::vector<std::string>& fields);

/// Mean post-activation per hidden neuron over `probe`, optionally with the
/// trigger stamped on every input first.
NeuronMap activation_profile(const Network& net, const LabeledSet& probe,
                             const std::optional<TriggerSpec>& trigger = std::nullopt);

/// after - before, entrywise.
NeuronMap activation_rise(const NeuronMap& after, const NeuronMap& before);

/// |profile(triggered) - profile(clean)| per hidden neuron.
NeuronMap tac(const Network& net, const LabeledSet& probe, const TriggerSpec& trigger);

/// |top-p(a) ∩ top-p(b)| / |top-p(b)|, top-p = first ceil(p * K) entries.
double coverage_ratio(std::span<const NeuronId> order_a, std::span<const NeuronId> order_b,
                      double p);

/// Mean, over one pass of mini-batches, of the L2 norm of each hidden
/// neuron's weight-gradient row. Parameters are never updated.
NeuronMap neuron_grad_activeness(const Network& net, const LabeledSet& data,
                                 std::size_t batch_size, std::uint64_t seed,
                                 std::size_t epochs = 1);

double mean_of(const NeuronMap& values);

double pearson(std::span<const double> x, std::span<const double> y);
/// Pearson correlation of average ranks.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace tsbd

#endif  // TSBD_METRICS_HPP_
