// Copyright (c) 2026 The condiff Authors. All Rights Reserved.
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

#include "condiff/commands.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "run configuration file");
  cmd->add_option("--out", args.out_dir, "output directory (overrides run.out_dir)");
  cmd->add_option("overrides", args.overrides, "key=value config overrides");
}

// Builds and validates the run config; prints machine-readable diagnostics
// and returns false on any error.
bool resolve_config(const CommonArgs& args, condiff::RunConfig& cfg, bool validate = true) {
  std::vector<std::string> errors;
  if (!args.config_path.empty()) {
    cfg = condiff::load_config_file(args.config_path, errors);
  } else {
    cfg = condiff::RunConfig{};
  }
  for (const auto& kv : args.overrides) condiff::apply_override(cfg, kv, errors);
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  if (validate) {
    for (auto& e : condiff::validate_config(cfg)) errors.push_back(e);
  }
  if (!errors.empty()) {
    for (const auto& e : errors)
      std::cerr << nlohmann::json{{"error", "validation"}, {"detail", e}}.dump() << "\n";
    return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PVT-conditioned diffusion segmentation toolkit"};
  app.require_subcommand(1);

  CommonArgs train_args, sample_args, eval_args, profile_args, ablate_args, gendata_args;
  std::string checkpoint;
  std::string gendata_out;
  int sample_count = 4;
  int ablate_seeds = 3;
  bool dump_trace = false;

  auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
  add_common(train, train_args);
  auto* sample = app.add_subcommand("sample", "sample masks from a checkpoint");
  add_common(sample, sample_args);
  sample->add_option("--checkpoint", checkpoint, "checkpoint path")->required();
  sample->add_option("--count", sample_count, "number of cases to sample");
  sample->add_flag("--dump-trace", dump_trace, "dump the first case's prediction trace");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint (best-of-n protocol)");
  add_common(eval, eval_args);
  eval->add_option("--checkpoint", checkpoint, "checkpoint path")->required();
  auto* profile = app.add_subcommand("profile", "profile parameters, memory and step times");
  add_common(profile, profile_args);
  auto* ablate = app.add_subcommand("ablate", "conditioning ablation: none / concat / additive");
  add_common(ablate, ablate_args);
  ablate->add_option("--seeds", ablate_seeds, "seeds per variant");
  auto* gendata = app.add_subcommand("gen-data", "generate a synthetic dataset file");
  add_common(gendata, gendata_args);
  gendata->add_option("--out-file", gendata_out, "dataset output path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    condiff::RunConfig cfg;
    if (train->parsed()) {
      if (!resolve_config(train_args, cfg)) return kExitValidation;
      auto art = condiff::commands::run_train(cfg);
      std::cout << nlohmann::json{{"checkpoint", art.checkpoint_path},
                                  {"config", art.config_path},
                                  {"log", art.log_path},
                                  {"steps", art.fit.steps},
                                  {"final_epoch_loss", art.fit.final_epoch_loss}}
                       .dump()
                << "\n";
    } else if (sample->parsed()) {
      if (!resolve_config(sample_args, cfg)) return kExitValidation;
      auto art = condiff::commands::run_sample(cfg, checkpoint, sample_count, dump_trace);
      std::cout << nlohmann::json{{"masks", art.mask_paths},
                                  {"class_map", art.class_map_path},
                                  {"trace_steps", art.trace_paths.size()}}
                       .dump()
                << "\n";
    } else if (eval->parsed()) {
      if (!resolve_config(eval_args, cfg)) return kExitValidation;
      auto rep = condiff::commands::run_eval(cfg, checkpoint);
      std::cout << rep.to_table();
    } else if (profile->parsed()) {
      if (!resolve_config(profile_args, cfg)) return kExitValidation;
      auto rep = condiff::commands::run_profile(cfg);
      std::cout << rep.to_table();
    } else if (ablate->parsed()) {
      if (!resolve_config(ablate_args, cfg)) return kExitValidation;
      auto rep = condiff::commands::run_ablate(cfg, ablate_seeds);
      std::cout << rep.to_table();
    } else if (gendata->parsed()) {
      if (!resolve_config(gendata_args, cfg)) return kExitValidation;
      auto path = condiff::commands::run_gendata(cfg, gendata_out);
      std::cout << nlohmann::json{{"dataset", path}}.dump() << "\n";
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << nlohmann::json{{"error", "validation"}, {"detail", e.what()}}.dump() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "runtime"}, {"detail", e.what()}}.dump() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
