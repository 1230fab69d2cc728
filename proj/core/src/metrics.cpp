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

#include "tsbd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "tsbd/random.hpp"
#include "tsbd/training.hpp"

namespace tsbd {

namespace {

void require_in_unit(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw DomainError(std::string("der: ") + name + " must lie in [0, 1]");
  }
}

std::optional<double> parse_optional(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

std::string format_optional(const std::optional<double>& v) {
  return v ? format_number(*v) : std::string();
}

}  // namespace

double accuracy(const Network& net, const LabeledSet& test) {
  if (test.size() == 0) throw DomainError("accuracy: empty set");
  const auto pred = argmax_rows(forward(net, test.inputs).logits());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == test.labels[i];
  return static_cast<double>(hits) / static_cast<double>(test.size());
}

double asr(const Network& net, const LabeledSet& test, const TriggerSpec& trigger, Label target) {
  const LabeledSet triggered = triggered_copy(test, trigger, target);
  if (triggered.size() == 0) throw DomainError("asr: no samples outside the target class");
  return accuracy(net, triggered);
}

double der(double acc_before, double asr_before, double acc_after, double asr_after) {
  require_in_unit(acc_before, "acc_before");
  require_in_unit(asr_before, "asr_before");
  require_in_unit(acc_after, "acc_after");
  require_in_unit(asr_after, "asr_after");
  const double asr_drop = asr_before - asr_after;
  const double acc_drop = acc_before - acc_after;
  return (std::max(0.0, asr_drop) - std::max(0.0, acc_drop) + 1.0) / 2.0;
}

DefenseReport baseline_report(std::string run_id, std::string attack, double acc, double asr) {
  DefenseReport r;
  r.run_id = std::move(run_id);
  r.attack = std::move(attack);
  r.acc_before = acc;
  r.asr_before = asr;
  return r;
}

DefenseReport defense_report(std::string run_id, std::string attack, double acc_before,
                             double asr_before, double acc_after, double asr_after) {
  DefenseReport r = baseline_report(std::move(run_id), std::move(attack), acc_before, asr_before);
  r.acc_after = acc_after;
  r.asr_after = asr_after;
  r.der = der(acc_before, asr_before, acc_after, asr_after);
  return r;
}

std::vector<std::string> report_header() {
  return {"run_id", "attack", "acc_before", "asr_before", "acc_after", "asr_after", "der"};
}

std::vector<std::string> report_fields(const DefenseReport& r) {
  return {r.run_id,
          r.attack,
          format_number(r.acc_before),
          format_number(r.asr_before),
          format_optional(r.acc_after),
          format_optional(r.asr_after),
          format_optional(r.der)};
}

DefenseReport parse_report_fields(const std::vector<std::string>& f) {
  if (f.size() != 7) throw FormatError("report row must have 7 fields");
  DefenseReport r;
  try {
    r.run_id = f[0];
    r.attack = f[1];
    r.acc_before = std::stod(f[2]);
    r.asr_before = std::stod(f[3]);
    r.acc_after = parse_optional(f[4]);
    r.asr_after = parse_optional(f[5]);
    r.der = parse_optional(f[6]);
  } catch (const std::logic_error&) {
    throw FormatError("report row has a non-numeric metric");
  }
  return r;
}

NeuronMap activation_profile(const Network& net, const LabeledSet& probe,
                             const std::optional<TriggerSpec>& trigger) {
  if (probe.size() == 0) throw DomainError("activation_profile: empty probe");
  Tensor2D inputs = probe.inputs;
  if (trigger) {
    for (std::size_t n = 0; n < inputs.rows(); ++n) apply_trigger_inplace(inputs.row(n), *trigger);
  }
  const ForwardResult fwd = forward(net, inputs);
  NeuronMap profile(net.hidden_layer_count());
  for (std::size_t l = 0; l < net.hidden_layer_count(); ++l) {
    const Tensor2D& act = fwd.activations[l];
    profile[l].assign(act.cols(), 0.0);
    for (std::size_t n = 0; n < act.rows(); ++n) {
      auto row = act.row(n);
      for (std::size_t k = 0; k < row.size(); ++k) profile[l][k] += row[k];
    }
    for (double& v : profile[l]) v /= static_cast<double>(act.rows());
  }
  return profile;
}

NeuronMap activation_rise(const NeuronMap& after, const NeuronMap& before) {
  if (after.size() != before.size()) throw DimensionError("activation_rise: layer mismatch");
  NeuronMap rise(after.size());
  for (std::size_t l = 0; l < after.size(); ++l) {
    if (after[l].size() != before[l].size()) {
      throw DimensionError("activation_rise: neuron count mismatch");
    }
    rise[l].resize(after[l].size());
    for (std::size_t k = 0; k < after[l].size(); ++k) rise[l][k] = after[l][k] - before[l][k];
  }
  return rise;
}

NeuronMap tac(const Network& net, const LabeledSet& probe, const TriggerSpec& trigger) {
  if (probe.size() == 0) throw DomainError("tac: empty probe");
  NeuronMap change = activation_rise(activation_profile(net, probe, trigger),
                                     activation_profile(net, probe));
  for (auto& layer : change) {
    for (double& v : layer) v = std::abs(v);
  }
  return change;
}

double coverage_ratio(std::span<const NeuronId> order_a, std::span<const NeuronId> order_b,
                      double p) {
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("coverage_ratio: p must lie in (0, 1]");
  if (order_a.size() != order_b.size() || order_a.empty()) {
    throw DimensionError("coverage_ratio: rankings must cover the same nonempty universe");
  }
  const std::size_t k = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(p * static_cast<double>(order_a.size()) - 1e-9)), 1,
      order_a.size());
  const std::set<NeuronId> top_a(order_a.begin(), order_a.begin() + static_cast<std::ptrdiff_t>(k));
  std::size_t shared = 0;
  for (std::size_t i = 0; i < k; ++i) shared += top_a.count(order_b[i]);
  return static_cast<double>(shared) / static_cast<double>(k);
}

NeuronMap neuron_grad_activeness(const Network& net, const LabeledSet& data,
                                 std::size_t batch_size, std::uint64_t seed,
                                 std::size_t epochs) {
  if (data.size() == 0) throw DomainError("neuron_grad_activeness: empty data");
  if (epochs == 0) throw DomainError("neuron_grad_activeness: epochs must be >= 1");
  NeuronMap sums(net.hidden_layer_count());
  for (std::size_t l = 0; l < sums.size(); ++l) sums[l].assign(net.layer(l).neurons(), 0.0);
  Rng rng(derive_seed(seed, 0xAC71));
  std::size_t batches = 0;
  for (std::size_t e = 0; e < epochs; ++e) {
    for (const auto& idx : minibatches(data.size(), batch_size, true, rng)) {
      const BackwardResult br = backward(net, make_batch(data, idx));
      if (!all_finite(br.gradients)) {
        throw DivergenceError("neuron_grad_activeness: non-finite gradient");
      }
      for (std::size_t l = 0; l < sums.size(); ++l) {
        const Tensor2D& gw = br.gradients.layers[l].weights;
        for (std::size_t k = 0; k < gw.rows(); ++k) {
          double sq = 0.0;
          for (float g : gw.row(k)) sq += static_cast<double>(g) * g;
          sums[l][k] += std::sqrt(sq);
        }
      }
      ++batches;
    }
  }
  for (auto& layer : sums) {
    for (double& v : layer) v /= static_cast<double>(batches);
  }
  return sums;
}

double mean_of(const NeuronMap& values) {
  const auto flat = flatten_neurons(values);
  if (flat.empty()) throw DomainError("mean_of: no values");
  return std::accumulate(flat.begin(), flat.end(), 0.0) / static_cast<double>(flat.size());
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("pearson: length mismatch");
  if (x.size() < 2) throw DomainError("pearson: need at least two samples");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DomainError("pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("spearman: length mismatch");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

}  // namespace tsbd
