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


// tsbd: batch front end for the attack / defend / analyze / sweep / report
// workflow. Exit codes: 0 ok, 2 config error, 3 stage failure, 4 missing or
// unreadable artifact.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tsbd/csv.hpp"
#include "tsbd/errors.hpp"
#include "tsbd/experiment.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string out;
  std::string artifacts;
  std::optional<std::uint64_t> seed;
};

struct VariantArgs {
  std::string variant;
  bool no_ft = false;
  bool vanilla_ft = false;
  bool per_layer = false;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool with_artifacts) {
  cmd->add_option("--config", a.config, "Experiment config file")->required();
  cmd->add_option("--out", a.out, "Output directory")->required();
  cmd->add_option("--seed", a.seed, "Override [run] seed");
  if (with_artifacts) {
    cmd->add_option("--artifacts", a.artifacts, "Directory holding attack artifacts (default: --out)");
  }
}

void add_variant(CLI::App* cmd, VariantArgs& v) {
  cmd->add_option("--variant", v.variant, "Reinitialization variant")
      ->check(CLI::IsMember({"v1", "v2", "v3", "V1", "V2", "V3"}));
  cmd->add_flag("--no-ft", v.no_ft, "Skip fine-tuning (epochs = 0)");
  cmd->add_flag("--vanilla-ft", v.vanilla_ft, "Plain fine-tuning (alpha = 0)");
  cmd->add_flag("--per-layer-ranking", v.per_layer, "Rank neurons within each layer");
}

tsbd::CommandContext context(const CommonArgs& a) {
  std::optional<std::filesystem::path> artifacts;
  if (!a.artifacts.empty()) artifacts = a.artifacts;
  return tsbd::make_context(a.config, a.out, artifacts, a.seed);
}

tsbd::DefendOptions options(const VariantArgs& v) {
  tsbd::DefendOptions o;
  if (!v.variant.empty()) o.variant = tsbd::parse_variant(v.variant);
  o.no_ft = v.no_ft;
  o.vanilla_ft = v.vanilla_ft;
  o.per_layer_ranking = v.per_layer;
  return o;
}

void print_report_file(const std::filesystem::path& path) {
  const tsbd::CsvTable t = tsbd::read_csv(path);
  std::cout << t.render();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TSBD backdoor defense lab"};
  app.require_subcommand(1);

  CommonArgs attack_args;
  CLI::App* attack = app.add_subcommand("attack", "Train the backdoored and clean models");
  add_common(attack, attack_args, false);

  CommonArgs defend_args;
  VariantArgs defend_variant;
  CLI::App* defend = app.add_subcommand("defend", "Run the defense on the backdoored model");
  add_common(defend, defend_args, true);
  add_variant(defend, defend_variant);

  CommonArgs analyze_args;
  CLI::App* analyze = app.add_subcommand("analyze", "Observation statistics and coverage curves");
  add_common(analyze, analyze_args, true);

  CommonArgs sweep_args;
  VariantArgs sweep_variant;
  std::string axis;
  std::vector<double> values;
  CLI::App* sweep = app.add_subcommand("sweep", "One defense run per axis value");
  add_common(sweep, sweep_args, false);
  add_variant(sweep, sweep_variant);
  sweep->add_option("--axis", axis,
                    "n_ratio, m_ratio, poisoning_ratio, clean_fraction or ft_lr")
      ->required();
  sweep->add_option("--values", values, "Comma-separated axis values")
      ->required()
      ->delimiter(',');

  std::string report_out;
  std::string report_artifacts;
  CLI::App* report = app.add_subcommand("report", "Collect report rows into summary.csv");
  report->add_option("--out", report_out, "Output directory")->required();
  report->add_option("--artifacts", report_artifacts, "Directory to scan (default: --out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? tsbd::kExitOk : tsbd::kExitConfig;
  }

  try {
    if (*attack) {
      const tsbd::CommandContext ctx = context(attack_args);
      tsbd::cmd_attack(ctx);
      print_report_file(ctx.out / "attack_report.csv");
    } else if (*defend) {
      const tsbd::CommandContext ctx = context(defend_args);
      tsbd::cmd_defend(ctx, options(defend_variant));
      print_report_file(ctx.out / "defense_report.csv");
    } else if (*analyze) {
      const tsbd::CommandContext ctx = context(analyze_args);
      tsbd::cmd_analyze(ctx);
      print_report_file(ctx.out / "obs1_summary.csv");
      print_report_file(ctx.out / "obs2_summary.csv");
    } else if (*sweep) {
      const tsbd::CommandContext ctx = context(sweep_args);
      tsbd::cmd_sweep(ctx, axis, values, options(sweep_variant));
      print_report_file(ctx.out / "sweep.csv");
    } else if (*report) {
      const std::filesystem::path src = report_artifacts.empty() ? report_out : report_artifacts;
      std::cout << tsbd::cmd_report(src, report_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "tsbd: error: " << e.what() << '\n';
    return tsbd::exit_code_for(e);
  }
  return tsbd::kExitOk;
}
