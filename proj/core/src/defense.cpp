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

#include "tsbd/defense.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "tsbd/binary_io.hpp"
#include "tsbd/checkpoint.hpp"
#include "tsbd/csv.hpp"
#include "tsbd/metrics.hpp"
#include "tsbd/random.hpp"
#include "tsbd/training.hpp"

namespace tsbd {

namespace {

constexpr double kDegenerateNorm = 1e-12;

std::size_t ceil_count(double ratio, std::size_t n) {
  const double raw = std::ceil(ratio * static_cast<double>(n) - 1e-9);
  return std::min(n, static_cast<std::size_t>(std::max(0.0, raw)));
}

bool finite_values(std::span<const float> v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

}  // namespace

// ---------------------------------------------------------------------------

UnlearnResult unlearn(Network net, const LabeledSet& data, const UnlearnConfig& cfg) {
  if (data.size() == 0) throw DomainError("unlearn: empty data");
  if (!(cfg.lr > 0.0f)) throw DomainError("unlearn: learning rate must be positive");
  if (!(cfg.stop_accuracy > 0.0 && cfg.stop_accuracy < 1.0)) {
    throw DomainError("unlearn: stop accuracy must lie in (0, 1)");
  }
  if (cfg.batch_size == 0) throw DomainError("unlearn: batch size must be >= 1");

  UnlearnResult result;
  double acc = accuracy(net, data);
  result.accuracy_trace.push_back(acc);
  Rng rng(derive_seed(cfg.seed, kMinibatchStream));
  while (acc > cfg.stop_accuracy && result.steps < cfg.max_steps) {
    for (const auto& idx : minibatches(data.size(), cfg.batch_size, true, rng)) {
      if (result.steps == cfg.max_steps) break;
      const BackwardResult br = backward(net, make_batch(data, idx));
      if (!std::isfinite(br.loss) || !all_finite(br.gradients)) {
        throw DivergenceError("unlearn: non-finite loss at step " +
                              std::to_string(result.steps + 1));
      }
      apply_sgd(net, br.gradients, cfg.lr, Direction::kAscend);
      ++result.steps;
    }
    acc = accuracy(net, data);
    result.accuracy_trace.push_back(acc);
  }
  result.reached_stop = acc <= cfg.stop_accuracy;
  result.net = std::move(net);
  return result;
}

// ---------------------------------------------------------------------------

NwcRecord compute_nwc(const Network& before, const Network& after) {
  require_congruent(before, after);
  NwcRecord record;
  for (std::size_t l = 0; l < before.hidden_layer_count(); ++l) {
    const Tensor2D& wb = before.layer(l).weights;
    const Tensor2D& wa = after.layer(l).weights;
    Tensor2D change(wb.rows(), wb.cols());
    std::vector<double> sums(wb.rows(), 0.0);
    for (std::size_t k = 0; k < wb.rows(); ++k) {
      for (std::size_t i = 0; i < wb.cols(); ++i) {
        const double d = std::abs(static_cast<double>(wa(k, i)) - static_cast<double>(wb(k, i)));
        change(k, i) = static_cast<float>(d);
        sums[k] += d;
      }
    }
    record.nwc.push_back(std::move(sums));
    record.subweight_change.push_back(std::move(change));
  }
  return record;
}

void write_nwc_csv(const NwcRecord& record, const std::filesystem::path& path) {
  CsvTable table({"layer", "neuron", "nwc"});
  for (std::size_t l = 0; l < record.nwc.size(); ++l) {
    for (std::size_t k = 0; k < record.nwc[l].size(); ++k) {
      table.add_row({format_number(l), format_number(k), format_number(record.nwc[l][k])});
    }
  }
  table.write(path);
}

std::vector<std::uint8_t> encode_subweight_changes(std::span<const Tensor2D> tensors) {
  ByteWriter w;
  w.magic("TSNW");
  w.u32(kSubweightFileVersion);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const Tensor2D& t : tensors) {
    w.u32(static_cast<std::uint32_t>(t.rows()));
    w.u32(static_cast<std::uint32_t>(t.cols()));
    for (float v : t.values()) w.f32(v);
  }
  return w.take();
}

std::vector<Tensor2D> decode_subweight_changes(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "subweight file");
  r.expect_magic("TSNW");
  const std::uint32_t version = r.u32();
  if (version != kSubweightFileVersion) {
    throw FormatError("subweight file: unsupported version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  std::vector<Tensor2D> out;
  for (std::uint32_t l = 0; l < count; ++l) {
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    r.require_available(static_cast<std::uint64_t>(rows) * cols, 4);
    std::vector<float> values(static_cast<std::size_t>(rows) * cols);
    for (float& v : values) {
      v = r.f32();
      if (!std::isfinite(v) || v < 0.0f) throw FormatError("subweight file: invalid change value");
    }
    out.emplace_back(rows, cols, std::move(values));
  }
  r.expect_end();
  return out;
}

void save_subweight_changes(const NwcRecord& record, const std::filesystem::path& path) {
  write_file_bytes(path, encode_subweight_changes(record.subweight_change));
}

std::vector<Tensor2D> load_subweight_changes(const std::filesystem::path& path) {
  return decode_subweight_changes(read_file_bytes(path));
}

// ---------------------------------------------------------------------------

std::size_t LayerMask::true_count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1));
}

std::size_t ReinitMask::true_count() const {
  std::size_t n = 0;
  for (const LayerMask& m : layers) n += m.true_count();
  return n;
}

ReinitMask select_reinit_mask(const NwcRecord& record, double n_ratio, double m_ratio,
                              ReinitVariant variant, RankingScope scope) {
  if (record.nwc.empty() || neuron_count(record.nwc) == 0) {
    throw DomainError("select_reinit_mask: empty NWC record");
  }
  if (record.nwc.size() != record.subweight_change.size()) {
    throw DimensionError("select_reinit_mask: nwc and subweight layers differ");
  }
  if (!(n_ratio >= 0.0 && n_ratio <= 1.0)) {
    throw DomainError("select_reinit_mask: neuron ratio must lie in [0, 1]");
  }
  if (!(m_ratio > 0.0 && m_ratio <= 1.0)) {
    throw DomainError("select_reinit_mask: weight ratio must lie in (0, 1]");
  }

  ReinitMask mask;
  for (const Tensor2D& t : record.subweight_change) {
    mask.layers.push_back({t.rows(), t.cols(), std::vector<std::uint8_t>(t.size(), 0)});
  }
  for (std::size_t l = 0; l < record.nwc.size(); ++l) {
    if (record.nwc[l].size() != record.subweight_change[l].rows()) {
      throw DimensionError("select_reinit_mask: nwc length does not match weight rows");
    }
  }

  if (scope == RankingScope::kGlobal) {
    const auto ranked = rank_descending(record.nwc);
    const std::size_t take = ceil_count(n_ratio, ranked.size());
    mask.selected_neurons.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(take));
  } else {
    for (std::size_t l = 0; l < record.nwc.size(); ++l) {
      const auto ranked = rank_descending_in_layer(record.nwc, l);
      const std::size_t take = ceil_count(n_ratio, ranked.size());
      mask.selected_neurons.insert(mask.selected_neurons.end(), ranked.begin(),
                                   ranked.begin() + static_cast<std::ptrdiff_t>(take));
    }
  }

  auto change_of = [&](std::size_t l, std::size_t k, std::size_t i) {
    return record.subweight_change[l](k, i);
  };

  switch (variant) {
    case ReinitVariant::kV1:
      for (const NeuronId& n : mask.selected_neurons) {
        LayerMask& m = mask.layers[n.layer];
        std::fill_n(m.bits.begin() + static_cast<std::ptrdiff_t>(n.neuron * m.cols), m.cols, 1);
      }
      break;
    case ReinitVariant::kV2:
      for (const NeuronId& n : mask.selected_neurons) {
        LayerMask& m = mask.layers[n.layer];
        std::vector<std::size_t> order(m.cols);
        for (std::size_t i = 0; i < m.cols; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          return change_of(n.layer, n.neuron, a) > change_of(n.layer, n.neuron, b);
        });
        const std::size_t take = ceil_count(m_ratio, m.cols);
        for (std::size_t j = 0; j < take; ++j) m.bits[n.neuron * m.cols + order[j]] = 1;
      }
      break;
    case ReinitVariant::kV3: {
      struct Entry {
        float change;
        std::size_t layer, neuron, sub;
      };
      std::vector<Entry> pool;
      for (const NeuronId& n : mask.selected_neurons) {
        for (std::size_t i = 0; i < mask.layers[n.layer].cols; ++i) {
          pool.push_back({change_of(n.layer, n.neuron, i), n.layer, n.neuron, i});
        }
      }
      std::sort(pool.begin(), pool.end(), [](const Entry& a, const Entry& b) {
        if (a.change != b.change) return a.change > b.change;
        return std::tie(a.layer, a.neuron, a.sub) < std::tie(b.layer, b.neuron, b.sub);
      });
      const std::size_t take = ceil_count(m_ratio, pool.size());
      for (std::size_t j = 0; j < take; ++j) {
        LayerMask& m = mask.layers[pool[j].layer];
        m.bits[pool[j].neuron * m.cols + pool[j].sub] = 1;
      }
      break;
    }
  }
  return mask;
}

Network zero_reinit(Network net, const ReinitMask& mask) {
  if (mask.layers.size() != net.hidden_layer_count()) {
    throw DimensionError("zero_reinit: mask layer count does not match hidden layers");
  }
  for (std::size_t l = 0; l < mask.layers.size(); ++l) {
    Tensor2D& w = net.layer(l).weights;
    const LayerMask& m = mask.layers[l];
    if (m.rows != w.rows() || m.cols != w.cols() || m.bits.size() != w.size()) {
      throw DimensionError("zero_reinit: mask shape mismatch at layer " + std::to_string(l));
    }
    auto values = w.values();
    for (std::size_t j = 0; j < values.size(); ++j) {
      if (m.bits[j]) values[j] = 0.0f;
    }
  }
  return net;
}

// ---------------------------------------------------------------------------

std::vector<float> regulated_gradient(std::span<const float> theta, const FlatGradientFn& grad,
                                      double r, double alpha) {
  if (!(r > 0.0)) throw DomainError("regulated_gradient: r must be positive");
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw DomainError("regulated_gradient: alpha must lie in [0, 1]");
  }
  std::vector<float> g1 = grad(theta);
  if (g1.size() != theta.size()) throw DimensionError("regulated_gradient: gradient size mismatch");
  if (!finite_values(g1)) throw DivergenceError("regulated_gradient: non-finite gradient");
  if (alpha == 0.0) return g1;

  double sq = 0.0;
  for (float g : g1) sq += static_cast<double>(g) * g;
  const double norm = std::sqrt(sq);
  if (norm < kDegenerateNorm) return g1;

  std::vector<float> shifted(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    shifted[i] = static_cast<float>(static_cast<double>(theta[i]) + r * g1[i] / norm);
  }
  const std::vector<float> g2 = grad(shifted);
  if (g2.size() != theta.size()) throw DimensionError("regulated_gradient: gradient size mismatch");
  if (!finite_values(g2)) throw DivergenceError("regulated_gradient: non-finite gradient");

  std::vector<float> out(theta.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>((1.0 - alpha) * g1[i] + alpha * g2[i]);
  }
  return out;
}

RegulatedGradient regulated_grad(const Network& net, const Batch& batch, double r, double alpha) {
  RegulatedGradient result;
  bool first = true;
  Network scratch = net;
  auto grad = [&](std::span<const float> theta) {
    assign_flat(scratch, theta);
    BackwardResult br = backward(scratch, batch);
    if (first) {
      result.loss = br.loss;
      first = false;
    }
    return flatten(br.gradients);
  };
  const std::vector<float> theta = flatten(net);
  result.gradients = unflatten_gradients(net, regulated_gradient(theta, grad, r, alpha));
  return result;
}

FtResult activeness_ft(Network net, const LabeledSet& data, const FtConfig& cfg) {
  if (data.size() == 0) throw DomainError("activeness_ft: empty data");
  if (!(cfg.lr > 0.0f)) throw DomainError("activeness_ft: learning rate must be positive");
  if (cfg.batch_size == 0) throw DomainError("activeness_ft: batch size must be >= 1");
  if (!(cfg.r > 0.0)) throw DomainError("activeness_ft: r must be positive");
  if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0)) {
    throw DomainError("activeness_ft: alpha must lie in [0, 1]");
  }
  FtResult result;
  Rng rng(derive_seed(cfg.seed, kMinibatchStream));
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double weighted = 0.0;
    for (const auto& idx : minibatches(data.size(), cfg.batch_size, true, rng)) {
      const RegulatedGradient rg = regulated_grad(net, make_batch(data, idx), cfg.r, cfg.alpha);
      if (!std::isfinite(rg.loss)) {
        throw DivergenceError("activeness_ft: non-finite loss at epoch " +
                              std::to_string(epoch + 1));
      }
      weighted += rg.loss * static_cast<double>(idx.size());
      apply_sgd(net, rg.gradients, cfg.lr, Direction::kDescend);
      ++result.steps;
    }
    result.loss_trace.push_back(weighted / static_cast<double>(data.size()));
  }
  result.net = std::move(net);
  return result;
}

// ---------------------------------------------------------------------------

namespace {

template <typename Fn>
auto run_stage(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

void persist(const TsbdConfig& cfg, const Network& net, const char* name) {
  if (cfg.stage_dir) save_checkpoint(net, *cfg.stage_dir / name);
}

}  // namespace

TsbdResult tsbd_run(const Network& backdoored, const LabeledSet& clean, const TsbdConfig& cfg) {
  if (clean.poisoned_count() != 0) {
    throw StageError("unlearn", "defender data must be unpoisoned");
  }
  TsbdResult out;

  UnlearnResult ul = run_stage("unlearn", [&] { return unlearn(backdoored, clean, cfg.unlearn); });
  out.unlearned = std::move(ul.net);
  out.unlearn_steps = ul.steps;
  out.unlearn_reached_stop = ul.reached_stop;
  out.unlearn_accuracy_trace = std::move(ul.accuracy_trace);
  run_stage("unlearn", [&] { persist(cfg, out.unlearned, "unlearned.tsbd"); return 0; });

  out.nwc = run_stage("nwc", [&] { return compute_nwc(backdoored, out.unlearned); });

  out.mask = run_stage("reinit", [&] {
    return select_reinit_mask(out.nwc, cfg.n_ratio, cfg.m_ratio, cfg.variant, cfg.scope);
  });
  out.reinitialized = run_stage("reinit", [&] { return zero_reinit(backdoored, out.mask); });
  run_stage("reinit", [&] { persist(cfg, out.reinitialized, "reinit.tsbd"); return 0; });

  FtResult ft = run_stage("finetune", [&] { return activeness_ft(out.reinitialized, clean, cfg.ft); });
  out.defended = std::move(ft.net);
  out.ft_steps = ft.steps;
  out.ft_loss_trace = std::move(ft.loss_trace);
  run_stage("finetune", [&] { persist(cfg, out.defended, "defended.tsbd"); return 0; });
  return out;
}

std::string to_string(ReinitVariant v) {
  switch (v) {
    case ReinitVariant::kV1: return "v1";
    case ReinitVariant::kV2: return "v2";
    case ReinitVariant::kV3: return "v3";
  }
  return "v3";
}

ReinitVariant parse_variant(const std::string& s) {
  if (s == "v1" || s == "V1") return ReinitVariant::kV1;
  if (s == "v2" || s == "V2") return ReinitVariant::kV2;
  if (s == "v3" || s == "V3") return ReinitVariant::kV3;
  throw DomainError("unknown reinit variant '" + s + "' (expected v1, v2 or v3)");
}

}  // namespace tsbd
