// Copyright 2026 The geosynth Authors.
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

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "geosynth/pipeline.hpp"

namespace {

using geosynth::RunConfig;

struct CliState {
  RunConfig cfg;
  std::string config_file;
  std::string preset;  // shorthand setting both arch and train presets
};

void add_common_options(CLI::App* cmd, CliState& st) {
  cmd->add_option("--config", st.config_file, "JSON config file; flags override its values");
  cmd->add_option("--data", st.cfg.data, "input CSV with a header row");
  cmd->add_option("--columns", st.cfg.columns, "coordinate column names (2 or 3)")->delimiter(',');
  cmd->add_option("--unit", st.cfg.unit, "source units: degrees|meters");
  cmd->add_option("--mask", st.cfg.mask, "polygon file bounding the valid region");
  cmd->add_option("--epsilon", st.cfg.epsilon, "privacy budget (positive real or 'inf')");
  cmd->add_option("--seed", st.cfg.seed, "master seed");
  cmd->add_option("--out", st.cfg.out, "output directory");
  cmd->add_option("--preset", st.preset, "desk|paper, sets both architecture and schedule");
  cmd->add_option("--arch-preset", st.cfg.arch_preset, "desk|paper");
  cmd->add_option("--train-preset", st.cfg.train_preset, "desk|paper");
  cmd->add_option("--noise-prior", st.cfg.noise_prior, "uniform|gaussian");
  cmd->add_option("--checkpoint", st.cfg.checkpoint, "checkpoint base path (.json/.bin pair)");
}

RunConfig effective_config(CliState& st, CLI::App* cmd) {
  RunConfig cfg;
  if (!st.config_file.empty()) cfg = RunConfig::from_json_file(st.config_file);
  // Flags override file values: copy back only what the user actually set.
  auto overridden = [&](const std::string& name) { return cmd->count(name) > 0; };
  const RunConfig& flags = st.cfg;
  if (overridden("--data")) cfg.data = flags.data;
  if (overridden("--columns")) cfg.columns = flags.columns;
  if (overridden("--unit")) cfg.unit = flags.unit;
  if (overridden("--mask")) cfg.mask = flags.mask;
  if (overridden("--epsilon")) cfg.epsilon = flags.epsilon;
  if (overridden("--seed")) cfg.seed = flags.seed;
  if (overridden("--out")) cfg.out = flags.out;
  if (overridden("--arch-preset")) cfg.arch_preset = flags.arch_preset;
  if (overridden("--train-preset")) cfg.train_preset = flags.train_preset;
  if (overridden("--noise-prior")) cfg.noise_prior = flags.noise_prior;
  if (overridden("--checkpoint")) cfg.checkpoint = flags.checkpoint;
  if (overridden("--samples")) cfg.eval_samples = flags.eval_samples;
  if (overridden("--sample-size")) cfg.eval_sample_size = flags.eval_sample_size;
  if (overridden("--cd-only")) cfg.cd_only = flags.cd_only;
  if (overridden("--n")) cfg.generate_n = flags.generate_n;
  if (overridden("--places")) cfg.places = flags.places;
  if (overridden("--k")) cfg.facility_ks = flags.facility_ks;
  if (overridden("--radius")) cfg.range_radii_m = flags.range_radii_m;
  if (overridden("--granularity")) cfg.granularities = flags.granularities;
  if (overridden("--candidates")) cfg.facility_candidates = flags.facility_candidates;
  if (overridden("--attraction-radius")) cfg.attraction_radius_m = flags.attraction_radius_m;
  if (overridden("--epsilons")) cfg.sweep_epsilons = flags.sweep_epsilons;
  if (!st.preset.empty()) {
    cfg.arch_preset = st.preset;
    cfg.train_preset = st.preset;
  }
  return cfg;
}

int run_stages(CliState& st, CLI::App* cmd, std::vector<std::string> stages) {
  RunConfig cfg = effective_config(st, cmd);
  cfg.stages = std::move(stages);
  const auto report = geosynth::run_pipeline(cfg);
  std::cout << "config_hash=" << report.config_hash << "\n";
  for (const auto& a : report.artifacts) std::cout << "wrote " << cfg.out << "/" << a << "\n";
  if (report.has_metrics) {
    std::printf("cd_mean=%.6g cd_std=%.6g", report.cd_mean, report.cd_std);
    if (!cfg.cd_only) std::printf(" emd_mean=%.6g emd_std=%.6g", report.emd_mean, report.emd_std);
    std::printf("\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"label-private GAN toolkit for synthesizing spatial point data"};
  app.require_subcommand(1);

  CliState st;

  auto* ingest = app.add_subcommand("ingest", "load, filter, and bound a coordinate CSV");
  add_common_options(ingest, st);

  auto* privatize = app.add_subcommand("privatize", "flip labels once under the privacy budget");
  add_common_options(privatize, st);

  auto* train = app.add_subcommand("train", "run the min-max training loop");
  add_common_options(train, st);

  auto* generate = app.add_subcommand("generate", "sample synthetic points from a checkpoint");
  add_common_options(generate, st);
  generate->add_option("--n", st.cfg.generate_n, "number of points to generate");

  auto* evaluate = app.add_subcommand("evaluate", "distributional metrics against real data");
  add_common_options(evaluate, st);
  evaluate->add_option("--samples", st.cfg.eval_samples, "number of evaluation samples");
  evaluate->add_option("--sample-size", st.cfg.eval_sample_size, "points per sample");
  evaluate->add_flag("--cd-only", st.cfg.cd_only, "skip the exact-assignment metric");

  auto* query = app.add_subcommand("query", "location-analytics agreement reports");
  add_common_options(query, st);
  std::string kind{"all"};
  query->add_option("kind", kind, "range|hotspot|facility|all");
  query->add_option("--samples", st.cfg.eval_samples, "number of synthetic samples");
  query->add_option("--sample-size", st.cfg.eval_sample_size, "points per synthetic sample");
  query->add_option("--places", st.cfg.places, "CSV of candidate places");
  query->add_option("--k", st.cfg.facility_ks, "facility counts")->delimiter(',');
  query->add_option("--radius", st.cfg.range_radii_m, "range radii in meters")->delimiter(',');
  query->add_option("--granularity", st.cfg.granularities, "hotspot grid sizes")->delimiter(',');
  query->add_option("--candidates", st.cfg.facility_candidates, "random candidate count");
  query->add_option("--attraction-radius", st.cfg.attraction_radius_m,
                    "coverage radius in meters");

  auto* sweep = app.add_subcommand("sweep", "repeat privatize/train/evaluate per privacy budget");
  add_common_options(sweep, st);
  sweep->add_option("--epsilons", st.cfg.sweep_epsilons, "privacy budgets")->delimiter(',');
  sweep->add_option("--samples", st.cfg.eval_samples, "number of evaluation samples");
  sweep->add_option("--sample-size", st.cfg.eval_sample_size, "points per sample");
  sweep->add_flag("--cd-only", st.cfg.cd_only, "skip the exact-assignment metric");

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) return run_stages(st, ingest, {"ingest"});
    if (privatize->parsed()) return run_stages(st, privatize, {"ingest", "privatize"});
    if (train->parsed()) return run_stages(st, train, {"ingest", "privatize", "train"});
    if (generate->parsed()) return run_stages(st, generate, {"generate"});
    if (evaluate->parsed()) return run_stages(st, evaluate, {"evaluate"});
    if (query->parsed()) {
      RunConfig cfg = effective_config(st, query);
      if (kind != "all") cfg.queries = {kind};
      cfg.stages = {"query"};
      const auto report = geosynth::run_pipeline(cfg);
      std::cout << "config_hash=" << report.config_hash << "\n";
      for (const auto& a : report.artifacts) std::cout << "wrote " << cfg.out << "/" << a << "\n";
      return 0;
    }
    if (sweep->parsed()) {
      RunConfig cfg = effective_config(st, sweep);
      const auto reports = geosynth::run_sweep(cfg);
      std::cout << "wrote " << cfg.out << "/sweep_summary.csv (" << reports.size()
                << " sub-reports)\n";
      return 0;
    }
  } catch (const geosynth::StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
