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


// Desk-scale end-to-end checks on the default configuration.

#include <gtest/gtest.h>

#include "tsbd/config.hpp"
#include "tsbd/experiment.hpp"
#include "tsbd/metrics.hpp"

namespace tsbd {
namespace {

const AttackOutcome& default_attack() {
  static const AttackOutcome a = run_attack(build_config(default_config_map()));
  return a;
}

TEST(Desk, CleanModelReachesAccuracyFloor) {
  EXPECT_GE(default_attack().clean_report.acc_before, 0.85);
}

TEST(Desk, CleanUnlearningStopsBeforeCap) {
  const ExperimentConfig cfg = build_config(default_config_map());
  const AttackOutcome& a = default_attack();
  const UnlearnResult r = unlearn(a.backdoored, defender_subset(cfg, a.corpus.train), cfg.unlearn);
  EXPECT_TRUE(r.reached_stop);
  EXPECT_LT(r.steps, cfg.unlearn.max_steps);
  EXPECT_LE(r.accuracy_trace.back(), cfg.unlearn.stop_accuracy);
}

TEST(Desk, DefenseRecoversAccuracyAndRemovesBackdoor) {
  const ExperimentConfig cfg = build_config(default_config_map());
  const AttackOutcome& a = default_attack();
  const auto d = run_defense(cfg, "desk", a.backdoored, a.corpus.train, a.corpus.test, a.corpus.trigger);
  EXPECT_LE(*d.report.asr_after, 0.10);
  EXPECT_GE(*d.report.acc_after, d.report.acc_before - 0.05);
}

TEST(Desk, NeuronRatioSweepKeepsAsrLow) {
  const auto rows = run_sweep(default_config_map(), SweepAxis::kNRatio, {0.05, 0.15, 0.50}, {}, 3);
  ASSERT_EQ(rows.size(), 3u);
  for (const SweepRow& r : rows) EXPECT_LE(*r.report.asr_after, 0.10) << "n_ratio " << r.value;
}

}  // namespace
}  // namespace tsbd
