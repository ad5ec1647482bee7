// Copyright (c) 2026 The augsearch Authors. All Rights Reserved.
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

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "augsearch/orchestrator.hpp"

namespace {

std::filesystem::path self_executable(const char* argv0) {
  std::error_code ec;
  auto path = std::filesystem::read_symlink("/proc/self/exe", ec);
  return ec ? std::filesystem::absolute(argv0) : path;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace augsearch;

  CLI::App app{"Augmentation policy search with augmented random search"};
  app.set_version_flag("--version", std::string(version_string()));
  app.require_subcommand(1);

  // search
  SearchCommand search;
  std::string config_file, manifest_file, out_dir;
  std::optional<std::uint64_t> run_seed, table_seed, target_seed;
  std::optional<std::size_t> max_iterations, num_directions, top_directions, workers, stride,
      plateau_window, table_size;
  std::optional<double> step_size, noise_std, reward_threshold;
  std::optional<std::string> evaluator, ranges_file;
  auto* s = app.add_subcommand("search", "Run one search");
  auto* config_opt = s->add_option("--config", config_file, "Config JSON")->check(CLI::ExistingFile);
  s->add_option("--manifest", manifest_file, "Re-run from a manifest.json")
      ->check(CLI::ExistingFile)
      ->excludes(config_opt);
  s->add_option("--out", out_dir, "Run directory");
  s->add_option("--run-seed", run_seed, "Run seed in [0, 1000)");
  s->add_option("--table-seed", table_seed, "Noise table seed");
  s->add_option("--table-size", table_size, "Noise table entries");
  s->add_option("--max-iterations", max_iterations);
  s->add_option("--num-directions", num_directions, "N");
  s->add_option("--top-directions", top_directions, "b");
  s->add_option("--step-size", step_size, "alpha");
  s->add_option("--noise-std", noise_std, "nu");
  s->add_option("--plateau-window", plateau_window);
  s->add_option("--reward-threshold", reward_threshold);
  s->add_option("--evaluator", evaluator,
                "synthetic:target, synthetic:sphere or external:\"<cmd>\"");
  s->add_option("--workers", workers, "Worker processes for external evaluators");
  s->add_option("--target-seed", target_seed, "Seed of the synthetic target");
  s->add_option("--checkpoint-stride", stride);
  s->add_option("--ranges-file", ranges_file, "Magnitude range JSON");

  // sweep
  SweepCommand sweep;
  std::string sweep_config, sweep_out;
  auto* sw = app.add_subcommand("sweep", "Run several searches with distinct seeds");
  sw->add_option("--config", sweep_config, "Config JSON")->required()->check(CLI::ExistingFile);
  sw->add_option("--runs", sweep.runs, "Number of runs")->capture_default_str();
  sw->add_option("--master-seed", sweep.master_seed, "Seed for drawing run seeds")
      ->capture_default_str();
  sw->add_option("--out", sweep_out, "Sweep directory");

  // finalize
  FinalizeCommand fin;
  std::string fin_out, fin_report, fin_ranges;
  auto* f = app.add_subcommand("finalize", "Concatenate the best policies into the final one");
  f->add_option("--history-dir", fin.history_dir, "Run or sweep directory")->required();
  f->add_option("--k", fin.k, "Policies to concatenate")->capture_default_str();
  f->add_option("--out", fin_out, "Output policy file");
  f->add_option("--report", fin_report, "Output report file");
  f->add_option("--ranges-file", fin.ranges_file, "Magnitude range JSON");

  // decode
  DecodeCommand dec;
  std::string dec_out;
  auto* d = app.add_subcommand("decode", "Decode a 30-number vector into a policy");
  d->add_option("vector", dec.vector_file, "JSON vector file, - for stdin")->required();
  d->add_flag("--pre-sigmoid", dec.pre_sigmoid, "Input is unnormalized parameters");
  d->add_option("--out", dec_out, "Output policy file");
  d->add_option("--ranges-file", dec.ranges_file, "Magnitude range JSON");

  // augment
  auto* aug = app.add_subcommand("augment", "Apply a policy to images");
  aug->require_subcommand(1);
  AugmentApplyCommand apply;
  std::string apply_pair;
  auto* ap = aug->add_subcommand("apply", "Augment one image");
  ap->add_option("--policy", apply.policy_file)->required()->check(CLI::ExistingFile);
  ap->add_option("--image", apply.image_file)->required()->check(CLI::ExistingFile);
  ap->add_option("--seed", apply.seed)->capture_default_str();
  ap->add_option("--out", apply.out_file)->required();
  ap->add_option("--pair-image", apply_pair, "Second image for SamplePairing");
  AugmentSheetCommand sheet;
  std::string sheet_pair;
  auto* sh = aug->add_subcommand("sheet", "Render a grid of augmented copies");
  sh->add_option("--policy", sheet.policy_file)->required()->check(CLI::ExistingFile);
  sh->add_option("--image", sheet.image_file)->required()->check(CLI::ExistingFile);
  sh->add_option("--rows", sheet.rows)->capture_default_str()->check(CLI::Range(1, 64));
  sh->add_option("--cols", sheet.cols)->capture_default_str()->check(CLI::Range(1, 64));
  sh->add_option("--seed", sheet.seed)->capture_default_str();
  sh->add_option("--out", sheet.out_file)->required();
  sh->add_option("--pair-image", sheet_pair, "Second image for SamplePairing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  if (s->parsed()) {
    if (!config_file.empty()) search.config_file = config_file;
    if (!manifest_file.empty()) search.manifest_file = manifest_file;
    if (!out_dir.empty()) search.out_dir = out_dir;
    auto& o = search.overrides;
    if (run_seed) o["run_seed"] = *run_seed;
    if (table_seed) o["table_seed"] = *table_seed;
    if (table_size) o["table_size"] = *table_size;
    if (max_iterations) o["max_iterations"] = *max_iterations;
    if (num_directions) o["num_directions"] = *num_directions;
    if (top_directions) o["top_directions"] = *top_directions;
    if (step_size) o["step_size"] = *step_size;
    if (noise_std) o["noise_std"] = *noise_std;
    if (plateau_window) o["plateau_window"] = *plateau_window;
    if (reward_threshold) o["reward_threshold"] = *reward_threshold;
    if (evaluator) o["evaluator"] = *evaluator;
    if (workers) o["workers"] = *workers;
    if (target_seed) o["target_seed"] = *target_seed;
    if (stride) o["checkpoint_stride"] = *stride;
    if (ranges_file) o["ranges_file"] = *ranges_file;
    return cmd_search(search, std::cout, std::cerr);
  }
  if (sw->parsed()) {
    sweep.config_file = sweep_config;
    if (!sweep_out.empty()) sweep.out_dir = sweep_out;
    sweep.executable = self_executable(argv[0]);
    return cmd_sweep(sweep, std::cout, std::cerr);
  }
  if (f->parsed()) {
    if (!fin_out.empty()) fin.out_file = fin_out;
    if (!fin_report.empty()) fin.report_file = fin_report;
    return cmd_finalize(fin, std::cout, std::cerr);
  }
  if (d->parsed()) {
    if (!dec_out.empty()) dec.out_file = dec_out;
    return cmd_decode(dec, std::cin, std::cout, std::cerr);
  }
  if (ap->parsed()) {
    if (!apply_pair.empty()) apply.pair_image = apply_pair;
    return cmd_augment_apply(apply, std::cout, std::cerr);
  }
  if (sh->parsed()) {
    if (!sheet_pair.empty()) sheet.pair_image = sheet_pair;
    return cmd_augment_sheet(sheet, std::cout, std::cerr);
  }
  return kExitFailure;
}
