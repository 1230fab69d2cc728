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


#include "tsbd/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <utility>

#include "tsbd/errors.hpp"

namespace tsbd {

namespace {

// Key order here is the order of render_config and of the shipped files.
const std::vector<std::pair<std::string, std::string>>& default_entries() {
  static const std::vector<std::pair<std::string, std::string>> entries = {
      {"run.seed", "1"},
      {"corpus.classes", "10"},
      {"corpus.per_class", "500"},
      {"corpus.grid_rows", "8"},
      {"corpus.grid_cols", "8"},
      {"corpus.noise", "0.15"},
      {"corpus.test_fraction", "0.2"},
      {"poison.trigger", "patch"},
      {"poison.ratio", "0.1"},
      {"poison.target", "0"},
      {"poison.patch_row", "6"},
      {"poison.patch_col", "6"},
      {"poison.patch_height", "2"},
      {"poison.patch_width", "2"},
      {"poison.patch_fill", "1"},
      {"poison.blend_ratio", "0.2"},
      {"model.hidden", "64, 32"},
      {"train.epochs", "30"},
      {"train.batch_size", "32"},
      {"train.lr", "0.005"},
      {"train.shuffle", "true"},
      {"clean.fraction", "0.05"},
      {"clean.sampling", "balanced"},
      {"unlearn.lr", "0.01"},
      {"unlearn.stop_accuracy", "0.1"},
      {"unlearn.max_steps", "5000"},
      {"unlearn.batch_size", "32"},
      {"finetune.lr", "0.01"},
      {"finetune.epochs", "20"},
      {"finetune.batch_size", "32"},
      {"finetune.r", "0.05"},
      {"finetune.alpha", "0.7"},
      {"reinit.n_ratio", "0.15"},
      {"reinit.m_ratio", "0.7"},
      {"reinit.variant", "v3"},
      {"reinit.ranking", "global"},
      {"analyze.poison_stop_asr", "0.1"},
      {"analyze.activeness_batch_size", "32"},
  };
  return entries;
}

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
  throw ConfigError("key '" + key + "': expected " + expected + ", got '" + value + "'");
}

class Reader {
 public:
  explicit Reader(const ConfigMap& map) : map_(map) {}

  const std::string& raw(const std::string& key) const {
    auto it = map_.find(key);
    if (it == map_.end()) throw ConfigError("missing required key '" + key + "'");
    return it->second;
  }

  std::uint64_t u64(const std::string& key) const {
    const std::string& v = raw(key);
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "an unsigned integer");
    return out;
  }

  std::size_t size(const std::string& key) const {
    const std::uint64_t v = u64(key);
    if (v > std::numeric_limits<std::size_t>::max()) bad_value(key, raw(key), "a smaller integer");
    return static_cast<std::size_t>(v);
  }

  double real(const std::string& key) const {
    const std::string& v = raw(key);
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
      bad_value(key, v, "a finite real number");
    }
    return out;
  }

  bool boolean(const std::string& key) const {
    const std::string& v = raw(key);
    if (v == "true") return true;
    if (v == "false") return false;
    bad_value(key, v, "true or false");
  }

  std::vector<std::size_t> size_list(const std::string& key) const {
    const std::string& v = raw(key);
    std::vector<std::size_t> out;
    std::string_view rest = v;
    while (true) {
      const auto comma = rest.find(',');
      const std::string_view item = trim(rest.substr(0, comma));
      std::size_t n = 0;
      auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), n);
      if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
        bad_value(key, v, "a comma-separated list of positive integers");
      }
      out.push_back(n);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    return out;
  }

 private:
  const ConfigMap& map_;
};

void require(bool ok, const std::string& key, const std::string& rule) {
  if (!ok) throw ConfigError("key '" + key + "': " + rule);
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& [k, v] : default_entries()) out.push_back(k);
    return out;
  }();
  return keys;
}

ConfigMap default_config_map() {
  ConfigMap map;
  for (const auto& [k, v] : default_entries()) map.emplace(k, v);
  return map;
}

std::string render_config(const ConfigMap& map) {
  std::ostringstream out;
  std::string section;
  for (const std::string& key : config_keys()) {
    auto it = map.find(key);
    if (it == map.end()) continue;
    const auto dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out << '\n';
      out << '[' << sec << "]\n";
      section = sec;
    }
    out << key.substr(dot + 1) << " = " << it->second << '\n';
  }
  return out.str();
}

ConfigMap parse_config_map(std::string_view text) {
  static const std::set<std::string> known(config_keys().begin(), config_keys().end());
  ConfigMap map;
  std::string section;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);

    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";

    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ConfigError(where + "malformed section header");
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string name(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (name.empty()) throw ConfigError(where + "empty key");
    if (section.empty()) throw ConfigError(where + "key '" + name + "' appears before any section");
    const std::string key = section + "." + name;
    if (!known.contains(key)) throw ConfigError(where + "unknown key '" + key + "'");
    if (value.empty()) throw ConfigError(where + "key '" + key + "' has an empty value");
    if (!map.emplace(key, value).second) {
      throw ConfigError(where + "duplicate key '" + key + "'");
    }
  }
  return map;
}

ExperimentConfig build_config(const ConfigMap& map) {
  for (const std::string& key : config_keys()) {
    if (!map.contains(key)) throw ConfigError("missing required key '" + key + "'");
  }
  const Reader in(map);
  ExperimentConfig cfg;

  cfg.seed = in.u64("run.seed");

  cfg.corpus.classes = in.size("corpus.classes");
  require(cfg.corpus.classes >= 2 && cfg.corpus.classes <= 65535, "corpus.classes",
          "must lie in [2, 65535]");
  cfg.corpus.per_class = in.size("corpus.per_class");
  require(cfg.corpus.per_class >= 1, "corpus.per_class", "must be at least 1");
  cfg.corpus.grid_rows = in.size("corpus.grid_rows");
  cfg.corpus.grid_cols = in.size("corpus.grid_cols");
  require(cfg.corpus.grid_rows >= 1, "corpus.grid_rows", "must be at least 1");
  require(cfg.corpus.grid_cols >= 1, "corpus.grid_cols", "must be at least 1");
  cfg.corpus.noise = in.real("corpus.noise");
  require(cfg.corpus.noise >= 0.0, "corpus.noise", "must be nonnegative");
  cfg.test_fraction = in.real("corpus.test_fraction");
  require(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0, "corpus.test_fraction",
          "must lie strictly inside (0, 1)");

  const std::string& trigger = in.raw("poison.trigger");
  if (trigger == "patch") {
    cfg.trigger = TriggerKind::kPatch;
  } else if (trigger == "blend") {
    cfg.trigger = TriggerKind::kBlend;
  } else {
    bad_value("poison.trigger", trigger, "patch or blend");
  }
  cfg.poisoning_ratio = in.real("poison.ratio");
  require(cfg.poisoning_ratio >= 0.0 && cfg.poisoning_ratio <= 1.0, "poison.ratio",
          "must lie in [0, 1]");
  const std::uint64_t target = in.u64("poison.target");
  require(target < cfg.corpus.classes, "poison.target", "must be below corpus.classes");
  cfg.target_label = static_cast<Label>(target);
  cfg.patch.grid_rows = cfg.corpus.grid_rows;
  cfg.patch.grid_cols = cfg.corpus.grid_cols;
  cfg.patch.row = in.size("poison.patch_row");
  cfg.patch.col = in.size("poison.patch_col");
  cfg.patch.height = in.size("poison.patch_height");
  cfg.patch.width = in.size("poison.patch_width");
  require(cfg.patch.height >= 1 && cfg.patch.row + cfg.patch.height <= cfg.patch.grid_rows,
          "poison.patch_height", "patch rows must lie inside the grid");
  require(cfg.patch.width >= 1 && cfg.patch.col + cfg.patch.width <= cfg.patch.grid_cols,
          "poison.patch_width", "patch columns must lie inside the grid");
  const double fill = in.real("poison.patch_fill");
  require(fill >= 0.0 && fill <= 1.0, "poison.patch_fill", "must lie in [0, 1]");
  cfg.patch.fill = static_cast<float>(fill);
  const double blend = in.real("poison.blend_ratio");
  require(blend > 0.0 && blend < 1.0, "poison.blend_ratio", "must lie strictly inside (0, 1)");
  cfg.blend_ratio = static_cast<float>(blend);

  cfg.hidden = in.size_list("model.hidden");
  for (std::size_t h : cfg.hidden) require(h >= 1, "model.hidden", "widths must be positive");

  cfg.train.epochs = in.size("train.epochs");
  require(cfg.train.epochs >= 1, "train.epochs", "must be at least 1");
  cfg.train.batch_size = in.size("train.batch_size");
  require(cfg.train.batch_size >= 1, "train.batch_size", "must be at least 1");
  const double train_lr = in.real("train.lr");
  require(train_lr > 0.0, "train.lr", "must be positive");
  cfg.train.lr = static_cast<float>(train_lr);
  cfg.train.shuffle = in.boolean("train.shuffle");

  cfg.clean_fraction = in.real("clean.fraction");
  require(cfg.clean_fraction > 0.0 && cfg.clean_fraction <= 1.0, "clean.fraction",
          "must lie in (0, 1]");
  const std::string& sampling = in.raw("clean.sampling");
  if (sampling == "balanced") {
    cfg.clean_sampling = SubsetSampling::kClassBalanced;
  } else if (sampling == "uniform") {
    cfg.clean_sampling = SubsetSampling::kUniform;
  } else {
    bad_value("clean.sampling", sampling, "balanced or uniform");
  }

  const double ul_lr = in.real("unlearn.lr");
  require(ul_lr > 0.0, "unlearn.lr", "must be positive");
  cfg.unlearn.lr = static_cast<float>(ul_lr);
  cfg.unlearn.stop_accuracy = in.real("unlearn.stop_accuracy");
  require(cfg.unlearn.stop_accuracy > 0.0 && cfg.unlearn.stop_accuracy < 1.0,
          "unlearn.stop_accuracy", "must lie strictly inside (0, 1)");
  cfg.unlearn.max_steps = in.size("unlearn.max_steps");
  require(cfg.unlearn.max_steps >= 1, "unlearn.max_steps", "must be at least 1");
  cfg.unlearn.batch_size = in.size("unlearn.batch_size");
  require(cfg.unlearn.batch_size >= 1, "unlearn.batch_size", "must be at least 1");

  const double ft_lr = in.real("finetune.lr");
  require(ft_lr > 0.0, "finetune.lr", "must be positive");
  cfg.ft.lr = static_cast<float>(ft_lr);
  cfg.ft.epochs = in.size("finetune.epochs");
  cfg.ft.batch_size = in.size("finetune.batch_size");
  require(cfg.ft.batch_size >= 1, "finetune.batch_size", "must be at least 1");
  cfg.ft.r = in.real("finetune.r");
  require(cfg.ft.r > 0.0, "finetune.r", "must be positive");
  cfg.ft.alpha = in.real("finetune.alpha");
  require(cfg.ft.alpha >= 0.0 && cfg.ft.alpha <= 1.0, "finetune.alpha", "must lie in [0, 1]");

  cfg.n_ratio = in.real("reinit.n_ratio");
  require(cfg.n_ratio > 0.0 && cfg.n_ratio <= 1.0, "reinit.n_ratio", "must lie in (0, 1]");
  cfg.m_ratio = in.real("reinit.m_ratio");
  require(cfg.m_ratio > 0.0 && cfg.m_ratio <= 1.0, "reinit.m_ratio", "must lie in (0, 1]");
  const std::string& variant = in.raw("reinit.variant");
  try {
    cfg.variant = parse_variant(variant);
  } catch (const Error&) {
    bad_value("reinit.variant", variant, "v1, v2 or v3");
  }
  const std::string& ranking = in.raw("reinit.ranking");
  if (ranking == "global") {
    cfg.scope = RankingScope::kGlobal;
  } else if (ranking == "per_layer") {
    cfg.scope = RankingScope::kPerLayer;
  } else {
    bad_value("reinit.ranking", ranking, "global or per_layer");
  }

  cfg.poison_stop_asr = in.real("analyze.poison_stop_asr");
  require(cfg.poison_stop_asr > 0.0 && cfg.poison_stop_asr < 1.0, "analyze.poison_stop_asr",
          "must lie strictly inside (0, 1)");
  cfg.activeness_batch_size = in.size("analyze.activeness_batch_size");
  require(cfg.activeness_batch_size >= 1, "analyze.activeness_batch_size", "must be at least 1");

  const std::uint64_t corpus_seed = component_seed(cfg, SeedStream::kCorpus);
  cfg.corpus.seed = corpus_seed;
  cfg.train.seed = component_seed(cfg, SeedStream::kTrain);
  cfg.unlearn.seed = component_seed(cfg, SeedStream::kUnlearn);
  cfg.ft.seed = component_seed(cfg, SeedStream::kFinetune);
  return cfg;
}

ExperimentConfig parse_config(std::string_view text) { return build_config(parse_config_map(text)); }

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::uint64_t component_seed(const ExperimentConfig& cfg, SeedStream stream) {
  return derive_seed(cfg.seed, static_cast<std::uint64_t>(stream));
}

std::string to_string(TriggerKind kind) { return kind == TriggerKind::kPatch ? "patch" : "blend"; }

}  // namespace tsbd
