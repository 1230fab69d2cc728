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

#include "tsbd/data.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tsbd/binary_io.hpp"
#include "tsbd/random.hpp"

namespace tsbd {

namespace {

constexpr std::uint64_t kTemplateStream = 0x7E4D'1A7Eull;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

}  // namespace

PatchTrigger default_patch_trigger(std::size_t grid_rows, std::size_t grid_cols) {
  PatchTrigger p;
  p.grid_rows = grid_rows;
  p.grid_cols = grid_cols;
  p.height = 2;
  p.width = 2;
  p.row = grid_rows - p.height;
  p.col = grid_cols - p.width;
  p.fill = 1.0f;
  return p;
}

BlendTrigger default_blend_trigger(std::uint64_t pattern_seed, std::size_t features,
                                   float ratio) {
  Rng rng(derive_seed(pattern_seed, 0xB1E4D));
  BlendTrigger b;
  b.ratio = ratio;
  b.pattern.resize(features);
  for (float& v : b.pattern) v = static_cast<float>(rng.uniform());
  return b;
}

void validate_trigger(const TriggerSpec& trigger, std::size_t features) {
  std::visit(Overloaded{
                 [&](const PatchTrigger& p) {
                   if (p.grid_rows * p.grid_cols != features) {
                     throw DomainError("patch trigger grid does not match feature width");
                   }
                   if (p.height == 0 || p.width == 0 || p.row + p.height > p.grid_rows ||
                       p.col + p.width > p.grid_cols) {
                     throw DomainError("patch trigger rectangle lies outside the grid");
                   }
                   if (!(p.fill >= 0.0f && p.fill <= 1.0f)) {
                     throw DomainError("patch fill must lie in [0, 1]");
                   }
                 },
                 [&](const BlendTrigger& b) {
                   if (b.pattern.size() != features) {
                     throw DomainError("blend pattern dimension does not match features");
                   }
                   if (!(b.ratio > 0.0f && b.ratio < 1.0f)) {
                     throw DomainError("blend ratio must lie strictly inside (0, 1)");
                   }
                   for (float v : b.pattern) {
                     if (!(v >= 0.0f && v <= 1.0f)) {
                       throw DomainError("blend pattern entries must lie in [0, 1]");
                     }
                   }
                 },
             },
             trigger);
}

void apply_trigger_inplace(std::span<float> x, const TriggerSpec& trigger) {
  validate_trigger(trigger, x.size());
  std::visit(Overloaded{
                 [&](const PatchTrigger& p) {
                   for (std::size_t r = p.row; r < p.row + p.height; ++r) {
                     for (std::size_t c = p.col; c < p.col + p.width; ++c) {
                       x[r * p.grid_cols + c] = p.fill;
                     }
                   }
                 },
                 [&](const BlendTrigger& b) {
                   const double beta = b.ratio;
                   for (std::size_t i = 0; i < x.size(); ++i) {
                     x[i] = clamp01((1.0 - beta) * x[i] + beta * b.pattern[i]);
                   }
                 },
             },
             trigger);
}

std::vector<float> apply_trigger(std::span<const float> x, const TriggerSpec& trigger) {
  std::vector<float> out(x.begin(), x.end());
  apply_trigger_inplace(out, trigger);
  return out;
}

std::size_t LabeledSet::poisoned_count() const {
  return static_cast<std::size_t>(std::count(poisoned.begin(), poisoned.end(), 1));
}

void validate(const LabeledSet& ds) {
  const std::size_t n = ds.labels.size();
  if (ds.inputs.rows() != n || ds.poisoned.size() != n || ds.original_labels.size() != n) {
    throw DimensionError("LabeledSet: parallel arrays differ in length");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (ds.labels[i] >= ds.classes || ds.original_labels[i] >= ds.classes) {
      throw DomainError("LabeledSet: label out of range at sample " + std::to_string(i));
    }
  }
}

std::size_t fraction_count(double ratio, std::size_t n) {
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
}

std::vector<float> class_template(std::size_t c, std::size_t grid_rows, std::size_t grid_cols) {
  Rng rng(derive_seed(kTemplateStream, c));
  std::vector<float> t(grid_rows * grid_cols);
  for (float& v : t) v = static_cast<float>(rng.uniform());
  return t;
}

LabeledSet gen_synthetic(const SyntheticConfig& cfg) {
  if (cfg.classes < 2) throw DomainError("gen_synthetic: need at least 2 classes");
  if (cfg.per_class < 1) throw DomainError("gen_synthetic: need at least 1 sample per class");
  if (cfg.grid_rows == 0 || cfg.grid_cols == 0) throw DomainError("gen_synthetic: empty grid");
  if (!(cfg.noise >= 0.0)) throw DomainError("gen_synthetic: noise must be nonnegative");
  if (cfg.classes > std::numeric_limits<std::uint16_t>::max()) {
    throw DomainError("gen_synthetic: class count exceeds the dataset format");
  }

  const std::size_t d = cfg.grid_rows * cfg.grid_cols;
  std::vector<std::vector<float>> templates;
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    templates.push_back(class_template(c, cfg.grid_rows, cfg.grid_cols));
  }

  const std::size_t n = cfg.classes * cfg.per_class;
  LabeledSet ds;
  ds.classes = cfg.classes;
  ds.inputs = Tensor2D(n, d);
  ds.labels.resize(n);
  ds.original_labels.resize(n);
  ds.poisoned.assign(n, 0);
  Rng rng(derive_seed(cfg.seed, 0xDA7A));
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t c = j % cfg.classes;
    auto x = ds.inputs.row(j);
    for (std::size_t i = 0; i < d; ++i) {
      const double noise = cfg.noise > 0.0 ? cfg.noise * rng.normal() : 0.0;
      x[i] = clamp01(templates[c][i] + noise);
    }
    ds.labels[j] = static_cast<Label>(c);
    ds.original_labels[j] = static_cast<Label>(c);
  }
  return ds;
}

LabeledSet poison_dataset(const LabeledSet& ds, const PoisonConfig& cfg) {
  validate(ds);
  if (!(cfg.poisoning_ratio >= 0.0 && cfg.poisoning_ratio <= 1.0)) {
    throw DomainError("poison_dataset: poisoning ratio must lie in [0, 1]");
  }
  if (cfg.target_label >= ds.classes) {
    throw DomainError("poison_dataset: target label out of range");
  }
  if (ds.poisoned_count() != 0) throw DomainError("poison_dataset: input is already poisoned");
  validate_trigger(cfg.trigger, ds.features());

  LabeledSet out = ds;
  Rng rng(derive_seed(cfg.seed, 0x9015));
  const auto chosen = sample_indices(rng, ds.size(), fraction_count(cfg.poisoning_ratio, ds.size()));
  for (std::size_t i : chosen) {
    apply_trigger_inplace(out.inputs.row(i), cfg.trigger);
    out.labels[i] = cfg.target_label;
    out.poisoned[i] = 1;
  }
  return out;
}

LabeledSet clean_subset(const LabeledSet& ds, double fraction, std::uint64_t seed,
                        SubsetSampling sampling) {
  validate(ds);
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw DomainError("clean_subset: fraction must lie in (0, 1]");
  }
  std::vector<std::size_t> clean;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!ds.poisoned[i]) clean.push_back(i);
  }
  const std::size_t k = fraction_count(fraction, ds.size());
  if (k == 0) throw DomainError("clean_subset: fraction selects no samples");
  if (k > clean.size()) {
    throw DomainError("clean_subset: not enough unpoisoned samples for the requested fraction");
  }
  Rng rng(derive_seed(seed, 0xC1EA));
  std::vector<std::size_t> indices;
  indices.reserve(k);
  if (sampling == SubsetSampling::kUniform) {
    for (std::size_t p : sample_indices(rng, clean.size(), k)) indices.push_back(clean[p]);
  } else {
    std::vector<std::vector<std::size_t>> by_class(ds.classes);
    for (std::size_t i : clean) by_class[ds.labels[i]].push_back(i);
    const std::size_t quota = k / ds.classes;
    std::vector<std::size_t> leftover;
    for (const auto& members : by_class) {
      const auto picks = sample_indices(rng, members.size(), std::min(quota, members.size()));
      std::vector<std::uint8_t> taken(members.size(), 0);
      for (std::size_t p : picks) {
        indices.push_back(members[p]);
        taken[p] = 1;
      }
      for (std::size_t j = 0; j < members.size(); ++j) {
        if (!taken[j]) leftover.push_back(members[j]);
      }
    }
    std::sort(leftover.begin(), leftover.end());
    for (std::size_t p : sample_indices(rng, leftover.size(), k - indices.size())) {
      indices.push_back(leftover[p]);
    }
    std::sort(indices.begin(), indices.end());
  }
  return select(ds, indices);
}

std::pair<LabeledSet, LabeledSet> split_dataset(const LabeledSet& ds, double test_fraction,
                                                std::uint64_t seed) {
  validate(ds);
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw DomainError("split_dataset: test fraction must lie in (0, 1)");
  }
  Rng rng(derive_seed(seed, 0x5911));
  const auto test_idx = sample_indices(rng, ds.size(), fraction_count(test_fraction, ds.size()));
  std::vector<std::uint8_t> is_test(ds.size(), 0);
  for (std::size_t i : test_idx) is_test[i] = 1;
  std::vector<std::size_t> train_idx;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!is_test[i]) train_idx.push_back(i);
  }
  return {select(ds, train_idx), select(ds, test_idx)};
}

LabeledSet select(const LabeledSet& ds, std::span<const std::size_t> indices) {
  LabeledSet out;
  out.classes = ds.classes;
  out.inputs = Tensor2D(indices.size(), ds.features());
  out.labels.reserve(indices.size());
  out.poisoned.reserve(indices.size());
  out.original_labels.reserve(indices.size());
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const std::size_t i = indices[j];
    if (i >= ds.size()) throw DimensionError("select: index out of range");
    auto src = ds.inputs.row(i);
    std::copy(src.begin(), src.end(), out.inputs.row(j).begin());
    out.labels.push_back(ds.labels[i]);
    out.poisoned.push_back(ds.poisoned[i]);
    out.original_labels.push_back(ds.original_labels[i]);
  }
  return out;
}

Batch make_batch(const LabeledSet& ds, std::span<const std::size_t> indices) {
  Batch b;
  b.inputs = Tensor2D(indices.size(), ds.features());
  b.labels.reserve(indices.size());
  for (std::size_t j = 0; j < indices.size(); ++j) {
    auto src = ds.inputs.row(indices[j]);
    std::copy(src.begin(), src.end(), b.inputs.row(j).begin());
    b.labels.push_back(ds.labels[indices[j]]);
  }
  return b;
}

Batch full_batch(const LabeledSet& ds) { return Batch{ds.inputs, ds.labels}; }

LabeledSet triggered_copy(const LabeledSet& ds, const TriggerSpec& trigger, Label target) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.original_labels[i] != target) keep.push_back(i);
  }
  LabeledSet out = select(ds, keep);
  for (std::size_t j = 0; j < out.size(); ++j) {
    apply_trigger_inplace(out.inputs.row(j), trigger);
    out.labels[j] = target;
    out.poisoned[j] = 1;
  }
  return out;
}

std::vector<std::uint8_t> encode_dataset(const LabeledSet& ds) {
  validate(ds);
  ByteWriter w;
  w.magic("TSDS");
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(ds.size()));
  w.u32(static_cast<std::uint32_t>(ds.features()));
  w.u32(static_cast<std::uint32_t>(ds.classes));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (float v : ds.inputs.row(i)) w.f32(v);
    w.u16(static_cast<std::uint16_t>(ds.labels[i]));
    w.u8(ds.poisoned[i]);
    w.u16(static_cast<std::uint16_t>(ds.original_labels[i]));
  }
  return w.take();
}

LabeledSet decode_dataset(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "dataset");
  r.expect_magic("TSDS");
  const std::uint32_t version = r.u32();
  if (version != kDatasetVersion) {
    throw FormatError("dataset: unsupported version " + std::to_string(version));
  }
  const std::uint32_t n = r.u32();
  const std::uint32_t d = r.u32();
  const std::uint32_t classes = r.u32();
  if (d == 0) throw FormatError("dataset: zero feature width");
  r.require_available(n, static_cast<std::uint64_t>(d) * 4 + 5);
  LabeledSet ds;
  ds.classes = classes;
  ds.inputs = Tensor2D(n, d);
  ds.labels.resize(n);
  ds.poisoned.resize(n);
  ds.original_labels.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (float& v : ds.inputs.row(i)) {
      v = r.f32();
      if (!std::isfinite(v)) throw FormatError("dataset: non-finite feature");
    }
    ds.labels[i] = r.u16();
    const std::uint8_t flag = r.u8();
    if (flag > 1) throw FormatError("dataset: poisoned flag must be 0 or 1");
    ds.poisoned[i] = flag;
    ds.original_labels[i] = r.u16();
  }
  r.expect_end();
  try {
    validate(ds);
  } catch (const Error& e) {
    throw FormatError(std::string("dataset: ") + e.what());
  }
  return ds;
}

void save_dataset(const LabeledSet& ds, const std::filesystem::path& path) {
  write_file_bytes(path, encode_dataset(ds));
}

LabeledSet load_dataset(const std::filesystem::path& path) {
  return decode_dataset(read_file_bytes(path));
}

}  // namespace tsbd
