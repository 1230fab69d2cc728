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


#include "tsbd/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "tsbd/binary_io.hpp"
#include "tsbd/checkpoint.hpp"
#include "tsbd/csv.hpp"
#include "tsbd/digest.hpp"
#include "tsbd/errors.hpp"
#include "tsbd/training.hpp"

namespace tsbd {

namespace fs = std::filesystem;

namespace {

constexpr const char* kToolVersion = "0.1.0";

std::optional<double> try_pearson(std::span<const double> x, std::span<const double> y) {
  try {
    return pearson(x, y);
  } catch (const DomainError&) {
    return std::nullopt;
  }
}

std::optional<double> try_spearman(std::span<const double> x, std::span<const double> y) {
  try {
    return spearman(x, y);
  } catch (const DomainError&) {
    return std::nullopt;
  }
}

std::string optional_field(const std::optional<double>& v) {
  return v ? format_number(*v) : std::string();
}

// Per-(layer, neuron) CSV with one value column per map.
void write_neuron_table(const fs::path& path, const std::vector<std::string>& names,
                        const std::vector<const NeuronMap*>& maps) {
  std::vector<std::string> header = {"layer", "neuron"};
  header.insert(header.end(), names.begin(), names.end());
  CsvTable table(header);
  const NeuronMap& shape = *maps.front();
  for (std::size_t l = 0; l < shape.size(); ++l) {
    for (std::size_t k = 0; k < shape[l].size(); ++k) {
      std::vector<std::string> row = {format_number(l), format_number(k)};
      for (const NeuronMap* m : maps) row.push_back(format_number((*m)[l][k]));
      table.add_row(row);
    }
  }
  table.write(path);
}

void write_report(const fs::path& path, const std::vector<DefenseReport>& reports) {
  CsvTable table(report_header());
  for (const DefenseReport& r : reports) table.add_row(report_fields(r));
  table.write(path);
}

void write_trace(const fs::path& path, const std::string& index, const std::string& value,
                 std::span<const double> trace, std::size_t first_index) {
  CsvTable table({index, value});
  for (std::size_t i = 0; i < trace.size(); ++i) {
    table.add_row({format_number(i + first_index), format_number(trace[i])});
  }
  table.write(path);
}

struct Manifest {
  std::string command;
  nlohmann::json options = nlohmann::json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
};

void write_manifest(const CommandContext& ctx, const Manifest& m) {
  nlohmann::json doc;
  doc["tool"] = "tsbd";
  doc["version"] = kToolVersion;
  doc["command"] = m.command;
  doc["config_sha256"] = ctx.config_sha256;
  doc["seed"] = ctx.cfg.seed;
  doc["options"] = m.options;
  nlohmann::json inputs = nlohmann::json::object();
  for (const std::string& name : m.inputs) inputs[name] = sha256_file(ctx.artifacts / name);
  nlohmann::json outputs = nlohmann::json::object();
  for (const std::string& name : m.outputs) outputs[name] = sha256_file(ctx.out / name);
  doc["inputs"] = inputs;
  doc["outputs"] = outputs;
  const std::string text = doc.dump(2) + "\n";
  write_file_bytes(ctx.out / (m.command + ".manifest.json"),
                   std::span<const std::uint8_t>(
                       reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

fs::path require_artifact(const fs::path& dir, const std::string& name) {
  const fs::path p = dir / name;
  if (!fs::is_regular_file(p)) {
    throw MissingArtifactError("missing artifact '" + p.string() +
                               "' (run the attack command first)");
  }
  return p;
}

void check_dataset_matches(const ExperimentConfig& cfg, const LabeledSet& ds,
                           const std::string& name) {
  if (ds.features() != cfg.corpus.grid_rows * cfg.corpus.grid_cols ||
      ds.classes != cfg.corpus.classes) {
    throw ConfigError("artifact '" + name + "' does not match the corpus section of the config");
  }
}

void check_network_matches(const ExperimentConfig& cfg, const Network& net,
                           const std::string& name) {
  if (net.input_width() != cfg.corpus.grid_rows * cfg.corpus.grid_cols ||
      net.output_width() != cfg.corpus.classes) {
    throw ConfigError("artifact '" + name + "' does not match the config's model shape");
  }
}

nlohmann::json options_json(const DefendOptions& opts) {
  nlohmann::json o = nlohmann::json::object();
  o["variant"] = opts.variant ? to_string(*opts.variant) : std::string("config");
  o["no_ft"] = opts.no_ft;
  o["vanilla_ft"] = opts.vanilla_ft;
  o["per_layer_ranking"] = opts.per_layer_ranking;
  return o;
}

}  // namespace

// ---------------------------------------------------------------------------
// Pipeline stages

TriggerSpec make_trigger(const ExperimentConfig& cfg) {
  if (cfg.trigger == TriggerKind::kPatch) return cfg.patch;
  return default_blend_trigger(component_seed(cfg, SeedStream::kBlendPattern),
                               cfg.corpus.grid_rows * cfg.corpus.grid_cols, cfg.blend_ratio);
}

std::vector<std::size_t> layer_sizes(const ExperimentConfig& cfg) {
  std::vector<std::size_t> sizes = {cfg.corpus.grid_rows * cfg.corpus.grid_cols};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(cfg.corpus.classes);
  return sizes;
}

Corpus build_corpus(const ExperimentConfig& cfg) {
  Corpus c;
  const LabeledSet all = gen_synthetic(cfg.corpus);
  auto [train, test] = split_dataset(all, cfg.test_fraction, component_seed(cfg, SeedStream::kSplit));
  c.trigger = make_trigger(cfg);
  PoisonConfig pc;
  pc.poisoning_ratio = cfg.poisoning_ratio;
  pc.target_label = cfg.target_label;
  pc.trigger = c.trigger;
  pc.seed = component_seed(cfg, SeedStream::kPoison);
  c.train = poison_dataset(train, pc);
  c.train_clean = std::move(train);
  c.test = std::move(test);
  return c;
}

AttackOutcome run_attack(const ExperimentConfig& cfg) {
  AttackOutcome out;
  out.corpus = build_corpus(cfg);
  const std::vector<std::size_t> sizes = layer_sizes(cfg);
  const Network init = init_network(component_seed(cfg, SeedStream::kInit), sizes);
  TrainResult bd = train(init, out.corpus.train, cfg.train);
  TrainResult cl = train(init, out.corpus.train_clean, cfg.train);
  out.backdoored = std::move(bd.net);
  out.backdoored_loss = std::move(bd.loss_trace);
  out.clean = std::move(cl.net);
  out.clean_loss = std::move(cl.loss_trace);

  const std::string id = attack_run_id(cfg);
  const std::string attack = to_string(cfg.trigger);
  const Corpus& c = out.corpus;
  out.backdoored_report = baseline_report(id, attack, accuracy(out.backdoored, c.test),
                                          asr(out.backdoored, c.test, c.trigger, cfg.target_label));
  out.clean_report = baseline_report(id + "-clean-model", attack, accuracy(out.clean, c.test),
                                     asr(out.clean, c.test, c.trigger, cfg.target_label));
  return out;
}

ExperimentConfig apply_options(ExperimentConfig cfg, const DefendOptions& opts) {
  if (opts.variant) cfg.variant = *opts.variant;
  if (opts.no_ft) cfg.ft.epochs = 0;
  if (opts.vanilla_ft) cfg.ft.alpha = 0.0;
  if (opts.per_layer_ranking) cfg.scope = RankingScope::kPerLayer;
  return cfg;
}

TsbdConfig tsbd_config(const ExperimentConfig& cfg) {
  TsbdConfig t;
  t.unlearn = cfg.unlearn;
  t.ft = cfg.ft;
  t.n_ratio = cfg.n_ratio;
  t.m_ratio = cfg.m_ratio;
  t.variant = cfg.variant;
  t.scope = cfg.scope;
  return t;
}

std::string attack_run_id(const ExperimentConfig& cfg) {
  return to_string(cfg.trigger) + "-s" + std::to_string(cfg.seed);
}

std::string defense_run_id(const ExperimentConfig& cfg, const DefendOptions& opts) {
  const ExperimentConfig eff = apply_options(cfg, opts);
  std::string id = attack_run_id(cfg) + "-" + to_string(eff.variant);
  if (opts.no_ft) id += "-noft";
  if (opts.vanilla_ft) id += "-vanilla";
  if (eff.scope == RankingScope::kPerLayer) id += "-perlayer";
  return id;
}

LabeledSet defender_subset(const ExperimentConfig& cfg, const LabeledSet& train) {
  return clean_subset(train, cfg.clean_fraction, component_seed(cfg, SeedStream::kCleanSubset),
                      cfg.clean_sampling);
}

DefenseOutcome run_defense(const ExperimentConfig& cfg, const std::string& run_id,
                           const Network& backdoored, const LabeledSet& train,
                           const LabeledSet& test, const TriggerSpec& trigger,
                           const std::optional<fs::path>& stage_dir) {
  const LabeledSet dc = defender_subset(cfg, train);
  TsbdConfig t = tsbd_config(cfg);
  t.stage_dir = stage_dir;
  DefenseOutcome out;
  out.result = tsbd_run(backdoored, dc, t);
  out.report = defense_report(run_id, to_string(cfg.trigger), accuracy(backdoored, test),
                              asr(backdoored, test, trigger, cfg.target_label),
                              accuracy(out.result.defended, test),
                              asr(out.result.defended, test, trigger, cfg.target_label));
  return out;
}

AnalysisOutcome run_analysis(const ExperimentConfig& cfg, const Network& backdoored,
                             const Network& clean, const LabeledSet& train,
                             const LabeledSet& test, const TriggerSpec& trigger) {
  AnalysisOutcome out;
  const LabeledSet dc = defender_subset(cfg, train);

  UnlearnResult cul = unlearn(backdoored, dc, cfg.unlearn);
  out.clean_unlearn_steps = cul.steps;
  out.clean_reached_stop = cul.reached_stop;
  out.clean_nwc = compute_nwc(backdoored, cul.net);

  UnlearnConfig puc = cfg.unlearn;
  puc.stop_accuracy = cfg.poison_stop_asr;
  const LabeledSet poison = triggered_copy(dc, trigger, cfg.target_label);
  UnlearnResult pul = unlearn(backdoored, poison, puc);
  out.poison_unlearn_steps = pul.steps;
  out.poison_reached_stop = pul.reached_stop;
  out.poison_nwc = compute_nwc(backdoored, pul.net);

  const std::vector<double> cv = flatten_neurons(out.clean_nwc.nwc);
  const std::vector<double> pv = flatten_neurons(out.poison_nwc.nwc);
  out.neurons = cv.size();
  out.pearson_all = try_pearson(cv, pv);
  for (std::size_t l = 0; l < out.clean_nwc.nwc.size(); ++l) {
    out.pearson_per_layer.push_back(try_pearson(out.clean_nwc.nwc[l], out.poison_nwc.nwc[l]));
  }

  const std::uint64_t act_seed = component_seed(cfg, SeedStream::kActiveness);
  out.activeness_backdoored =
      neuron_grad_activeness(backdoored, dc, cfg.activeness_batch_size, act_seed);
  out.activeness_clean = neuron_grad_activeness(clean, dc, cfg.activeness_batch_size, act_seed);

  out.tac = tac(backdoored, test, trigger);
  out.spearman_tac_nwc = try_spearman(flatten_neurons(out.tac), cv);
  const std::vector<NeuronId> tac_order = rank_descending(out.tac);
  const std::vector<NeuronId> nwc_order = rank_descending(out.clean_nwc.nwc);
  for (int k = 1; k <= 10; ++k) {
    const double p = k / 20.0;
    out.coverage.push_back({p, coverage_ratio(tac_order, nwc_order, p)});
  }

  out.h_clean = activation_profile(backdoored, test);
  out.h_poison = activation_profile(backdoored, test, trigger);
  out.h_clean_ul = activation_profile(cul.net, test);
  out.h_poison_ul = activation_profile(cul.net, test, trigger);
  return out;
}

SweepAxis parse_axis(const std::string& name) {
  if (name == "n_ratio") return SweepAxis::kNRatio;
  if (name == "m_ratio") return SweepAxis::kMRatio;
  if (name == "poisoning_ratio") return SweepAxis::kPoisoningRatio;
  if (name == "clean_fraction") return SweepAxis::kCleanFraction;
  if (name == "ft_lr") return SweepAxis::kFtLr;
  throw DomainError("unknown sweep axis '" + name +
                    "' (expected n_ratio, m_ratio, poisoning_ratio, clean_fraction or ft_lr)");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kNRatio: return "n_ratio";
    case SweepAxis::kMRatio: return "m_ratio";
    case SweepAxis::kPoisoningRatio: return "poisoning_ratio";
    case SweepAxis::kCleanFraction: return "clean_fraction";
    case SweepAxis::kFtLr: return "ft_lr";
  }
  return "n_ratio";
}

std::string config_key(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kNRatio: return "reinit.n_ratio";
    case SweepAxis::kMRatio: return "reinit.m_ratio";
    case SweepAxis::kPoisoningRatio: return "poison.ratio";
    case SweepAxis::kCleanFraction: return "clean.fraction";
    case SweepAxis::kFtLr: return "finetune.lr";
  }
  return "reinit.n_ratio";
}

std::size_t worker_count(std::size_t jobs) {
  std::size_t cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("TSBD_THREADS"); env != nullptr && *env != '\0') {
    const std::string_view v(env);
    std::size_t n = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
    if (ec != std::errc() || ptr != v.data() + v.size() || n == 0) {
      throw ConfigError("TSBD_THREADS must be a positive integer, got '" + std::string(v) + "'");
    }
    cap = n;
  }
  return std::max<std::size_t>(1, std::min(cap, jobs));
}

std::vector<SweepRow> run_sweep(const ConfigMap& base, SweepAxis axis, std::vector<double> values,
                                const DefendOptions& opts, std::size_t threads) {
  if (values.empty()) throw DomainError("sweep: no values given");
  std::sort(values.begin(), values.end());
  if (std::adjacent_find(values.begin(), values.end()) != values.end()) {
    throw DomainError("sweep: duplicate axis value");
  }
  std::vector<ExperimentConfig> cfgs;
  for (double v : values) {
    ConfigMap m = base;
    m[config_key(axis)] = format_number(v);
    cfgs.push_back(apply_options(build_config(m), opts));
  }

  // Only the poisoning ratio changes the attack; every other axis reuses it.
  std::map<std::size_t, AttackOutcome> attacks;
  const bool shared_attack = axis != SweepAxis::kPoisoningRatio;
  std::vector<SweepRow> rows(values.size());
  std::vector<std::exception_ptr> errors(values.size());

  auto attack_for = [&](std::size_t i) -> const AttackOutcome& {
    return attacks.at(shared_attack ? 0 : i);
  };
  auto run_attack_job = [&](std::size_t i) { attacks.at(i) = run_attack(cfgs[i]); };
  auto run_defense_job = [&](std::size_t i) {
    const AttackOutcome& a = attack_for(i);
    DefenseOutcome d = run_defense(cfgs[i], defense_run_id(cfgs[i], opts), a.backdoored,
                                   a.corpus.train, a.corpus.test, a.corpus.trigger);
    rows[i].value = values[i];
    rows[i].report = std::move(d.report);
    rows[i].unlearn_steps = d.result.unlearn_steps;
    rows[i].masked_subweights = d.result.mask.true_count();
  };

  auto fan_out = [&](std::size_t jobs, const auto& job) {
    std::size_t next = 0;
    std::mutex mu;
    auto worker = [&] {
      while (true) {
        std::size_t i;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (next == jobs) return;
          i = next++;
        }
        try {
          job(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    const std::size_t n = std::max<std::size_t>(1, std::min(threads, jobs));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (std::thread& t : pool) t.join();
    for (const std::exception_ptr& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  };

  const std::size_t attack_jobs = shared_attack ? 1 : values.size();
  for (std::size_t i = 0; i < attack_jobs; ++i) attacks.emplace(i, AttackOutcome{});
  fan_out(attack_jobs, run_attack_job);
  fan_out(values.size(), run_defense_job);
  return rows;
}

// ---------------------------------------------------------------------------
// Commands

CommandContext make_context(const fs::path& config_path, const fs::path& out,
                            const std::optional<fs::path>& artifacts,
                            const std::optional<std::uint64_t>& seed) {
  std::ifstream in(config_path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + config_path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  CommandContext ctx;
  ctx.config_map = parse_config_map(text);
  if (seed) ctx.config_map["run.seed"] = std::to_string(*seed);
  ctx.cfg = build_config(ctx.config_map);
  ctx.config_sha256 = sha256_hex(text);
  ctx.out = out;
  ctx.artifacts = artifacts.value_or(out);
  return ctx;
}

void cmd_attack(const CommandContext& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  AttackOutcome a;
  try {
    a = run_attack(cfg);
  } catch (const DivergenceError& e) {
    throw StageError("attack", e.what());
  }
  fs::create_directories(ctx.out);
  save_checkpoint(a.backdoored, ctx.out / "backdoored.tsbd");
  save_checkpoint(a.clean, ctx.out / "clean.tsbd");
  save_dataset(a.corpus.train, ctx.out / "dataset.tsds");
  save_dataset(a.corpus.test, ctx.out / "test.tsds");
  write_report(ctx.out / "attack_report.csv", {a.backdoored_report, a.clean_report});
  write_loss_trace_csv(a.backdoored_loss, ctx.out / "train_loss_backdoored.csv");
  write_loss_trace_csv(a.clean_loss, ctx.out / "train_loss_clean.csv");

  Manifest m;
  m.command = "attack";
  m.outputs = {"backdoored.tsbd",          "clean.tsbd",
               "dataset.tsds",             "test.tsds",
               "attack_report.csv",        "train_loss_backdoored.csv",
               "train_loss_clean.csv"};
  write_manifest(ctx, m);
}

void cmd_defend(const CommandContext& ctx, const DefendOptions& opts) {
  const ExperimentConfig cfg = apply_options(ctx.cfg, opts);
  const Network bd = load_checkpoint(require_artifact(ctx.artifacts, "backdoored.tsbd"));
  const LabeledSet train = load_dataset(require_artifact(ctx.artifacts, "dataset.tsds"));
  const LabeledSet test = load_dataset(require_artifact(ctx.artifacts, "test.tsds"));
  check_network_matches(cfg, bd, "backdoored.tsbd");
  check_dataset_matches(cfg, train, "dataset.tsds");
  check_dataset_matches(cfg, test, "test.tsds");

  fs::create_directories(ctx.out);
  const DefenseOutcome d = run_defense(cfg, defense_run_id(ctx.cfg, opts), bd, train, test,
                                       make_trigger(cfg), ctx.out);
  const TsbdResult& r = d.result;
  write_nwc_csv(r.nwc, ctx.out / "nwc.csv");
  save_subweight_changes(r.nwc, ctx.out / "nwc_subweights.tsnw");

  CsvTable mask({"layer", "rows", "cols", "selected_neurons", "masked_subweights"});
  for (std::size_t l = 0; l < r.mask.layers.size(); ++l) {
    const LayerMask& lm = r.mask.layers[l];
    const auto selected = std::count_if(r.mask.selected_neurons.begin(),
                                        r.mask.selected_neurons.end(),
                                        [&](const NeuronId& id) { return id.layer == l; });
    mask.add_row({format_number(l), format_number(lm.rows), format_number(lm.cols),
                  format_number(static_cast<std::size_t>(selected)),
                  format_number(lm.true_count())});
  }
  mask.write(ctx.out / "mask_stats.csv");
  write_trace(ctx.out / "unlearn_trace.csv", "epoch", "accuracy", r.unlearn_accuracy_trace, 0);
  write_loss_trace_csv(r.ft_loss_trace, ctx.out / "ft_loss.csv");
  write_report(ctx.out / "defense_report.csv", {d.report});

  Manifest m;
  m.command = "defend";
  m.options = options_json(opts);
  m.options["unlearn_steps"] = r.unlearn_steps;
  m.options["unlearn_reached_stop"] = r.unlearn_reached_stop;
  m.inputs = {"backdoored.tsbd", "dataset.tsds", "test.tsds"};
  m.outputs = {"unlearned.tsbd",  "reinit.tsbd",       "defended.tsbd",
               "nwc.csv",         "nwc_subweights.tsnw", "mask_stats.csv",
               "unlearn_trace.csv", "ft_loss.csv",     "defense_report.csv"};
  write_manifest(ctx, m);
}

void cmd_analyze(const CommandContext& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  const Network bd = load_checkpoint(require_artifact(ctx.artifacts, "backdoored.tsbd"));
  const Network cl = load_checkpoint(require_artifact(ctx.artifacts, "clean.tsbd"));
  const LabeledSet train = load_dataset(require_artifact(ctx.artifacts, "dataset.tsds"));
  const LabeledSet test = load_dataset(require_artifact(ctx.artifacts, "test.tsds"));
  check_network_matches(cfg, bd, "backdoored.tsbd");
  check_network_matches(cfg, cl, "clean.tsbd");
  check_dataset_matches(cfg, train, "dataset.tsds");
  check_dataset_matches(cfg, test, "test.tsds");

  AnalysisOutcome a;
  try {
    a = run_analysis(cfg, bd, cl, train, test, make_trigger(cfg));
  } catch (const DivergenceError& e) {
    throw StageError("analyze", e.what());
  }
  fs::create_directories(ctx.out);

  write_neuron_table(ctx.out / "obs1_scatter.csv", {"clean_nwc", "poison_nwc"},
                     {&a.clean_nwc.nwc, &a.poison_nwc.nwc});
  CsvTable obs1({"scope", "neurons", "pearson"});
  obs1.add_row({"all", format_number(a.neurons), optional_field(a.pearson_all)});
  for (std::size_t l = 0; l < a.pearson_per_layer.size(); ++l) {
    obs1.add_row({"layer" + std::to_string(l), format_number(a.clean_nwc.nwc[l].size()),
                  optional_field(a.pearson_per_layer[l])});
  }
  obs1.write(ctx.out / "obs1_summary.csv");

  write_neuron_table(ctx.out / "obs2_activeness.csv", {"backdoored", "clean"},
                     {&a.activeness_backdoored, &a.activeness_clean});
  CsvTable obs2({"model", "neurons", "mean_activeness"});
  obs2.add_row({"backdoored", format_number(a.neurons),
                format_number(mean_of(a.activeness_backdoored))});
  obs2.add_row({"clean", format_number(a.neurons), format_number(mean_of(a.activeness_clean))});
  obs2.write(ctx.out / "obs2_summary.csv");

  CsvTable cov({"pair", "p", "ratio"});
  for (const CoveragePoint& c : a.coverage) {
    cov.add_row({"tac_vs_nwc", format_number(c.p), format_number(c.ratio)});
  }
  cov.write(ctx.out / "coverage.csv");

  const NeuronMap rise_clean = activation_rise(a.h_clean_ul, a.h_clean);
  const NeuronMap rise_poison = activation_rise(a.h_poison_ul, a.h_poison);
  write_neuron_table(ctx.out / "activation_profiles.csv",
                     {"h_clean", "h_poison", "h_clean_unlearned", "h_poison_unlearned",
                      "rise_clean", "rise_poison", "tac"},
                     {&a.h_clean, &a.h_poison, &a.h_clean_ul, &a.h_poison_ul, &rise_clean,
                      &rise_poison, &a.tac});

  CsvTable summary({"key", "value"});
  summary.add_row({"clean_unlearn_steps", format_number(a.clean_unlearn_steps)});
  summary.add_row({"clean_unlearn_reached_stop", a.clean_reached_stop ? "true" : "false"});
  summary.add_row({"poison_unlearn_steps", format_number(a.poison_unlearn_steps)});
  summary.add_row({"poison_unlearn_reached_stop", a.poison_reached_stop ? "true" : "false"});
  summary.add_row({"spearman_tac_nwc", optional_field(a.spearman_tac_nwc)});
  summary.write(ctx.out / "analysis_summary.csv");

  Manifest m;
  m.command = "analyze";
  m.inputs = {"backdoored.tsbd", "clean.tsbd", "dataset.tsds", "test.tsds"};
  m.outputs = {"obs1_scatter.csv",    "obs1_summary.csv", "obs2_activeness.csv",
               "obs2_summary.csv",    "coverage.csv",     "activation_profiles.csv",
               "analysis_summary.csv"};
  write_manifest(ctx, m);
}

void cmd_sweep(const CommandContext& ctx, const std::string& axis_name,
               const std::vector<double>& values, const DefendOptions& opts) {
  const SweepAxis axis = parse_axis(axis_name);
  std::vector<SweepRow> rows;
  try {
    rows = run_sweep(ctx.config_map, axis, values, opts, worker_count(values.size()));
  } catch (const DivergenceError& e) {
    throw StageError("sweep", e.what());
  }
  std::vector<std::string> header = {"axis", "value"};
  for (const std::string& h : report_header()) header.push_back(h);
  header.push_back("unlearn_steps");
  header.push_back("masked_subweights");
  CsvTable table(header);
  for (const SweepRow& r : rows) {
    std::vector<std::string> row = {to_string(axis), format_number(r.value)};
    for (const std::string& f : report_fields(r.report)) row.push_back(f);
    row.push_back(format_number(r.unlearn_steps));
    row.push_back(format_number(r.masked_subweights));
    table.add_row(row);
  }
  fs::create_directories(ctx.out);
  table.write(ctx.out / "sweep.csv");

  Manifest m;
  m.command = "sweep";
  m.options = options_json(opts);
  m.options["axis"] = to_string(axis);
  nlohmann::json vals = nlohmann::json::array();
  for (const SweepRow& r : rows) vals.push_back(r.value);
  m.options["values"] = vals;
  m.outputs = {"sweep.csv"};
  write_manifest(ctx, m);
}

std::string cmd_report(const fs::path& artifacts, const fs::path& out) {
  if (!fs::is_directory(artifacts)) {
    throw MissingArtifactError("artifact directory '" + artifacts.string() + "' does not exist");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(artifacts)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && (name == "attack_report.csv" || name == "defense_report.csv")) {
      files.push_back(entry.path());
    }
  }
  if (files.empty()) {
    throw MissingArtifactError("no attack_report.csv or defense_report.csv under '" +
                               artifacts.string() + "'");
  }
  std::vector<std::vector<std::string>> rows;
  for (const fs::path& f : files) {
    const CsvTable parsed = read_csv(f);
    if (parsed.header() != report_header()) {
      throw FormatError("report file '" + f.string() + "' has an unexpected header");
    }
    for (const auto& row : parsed.rows()) {
      rows.push_back(report_fields(parse_report_fields(row)));
    }
  }
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  CsvTable table(report_header());
  for (const auto& r : rows) table.add_row(r);
  fs::create_directories(out);
  table.write(out / "summary.csv");

  std::vector<std::string> header = report_header();
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream text;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      text << (c == 0 ? "" : "  ") << cells[c] << std::string(width[c] - cells[c].size(), ' ');
    }
    text << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return text.str();
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DomainError*>(&e)) {
    return kExitConfig;
  }
  if (dynamic_cast<const MissingArtifactError*>(&e) || dynamic_cast<const FormatError*>(&e)) {
    return kExitMissingArtifact;
  }
  return kExitStage;
}

}  // namespace tsbd
