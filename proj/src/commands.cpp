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

#include "condiff/io.hpp"
#include "condiff/sampling.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <iomanip>
#include <sstream>

namespace condiff::commands {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string path_join(const std::string& dir, const std::string& name) {
  if (dir.empty()) return name;
  return dir.back() == '/' ? dir + name : dir + "/" + name;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open file for writing: " + path);
  f << text;
}

}  // namespace

data::Dataset resolve_train_dataset(const RunConfig& cfg) {
  if (cfg.data_source == "file") return data::load_dataset(cfg.data_path);
  const int div = cfg.to_model_config().adapter.cumulative_stride();
  return data::generate_synthetic(cfg.train_n, cfg.classes, cfg.data_size, cfg.data_size,
                                  RngStream(cfg.data_seed).fork(1).next_u64(), cfg.rare_rate, div);
}

data::Dataset resolve_val_dataset(const RunConfig& cfg) {
  if (cfg.data_source == "file") return data::load_dataset(cfg.data_path);
  const int div = cfg.to_model_config().adapter.cumulative_stride();
  return data::generate_synthetic(cfg.val_n, cfg.classes, cfg.data_size, cfg.data_size,
                                  RngStream(cfg.data_seed).fork(2).next_u64(), cfg.rare_rate, div);
}

training::TrainState train_to_dir(const RunConfig& cfg, const data::Dataset& train_set,
                                  const std::string& dir, TrainArtifacts* artifacts) {
  io::ensure_dir(dir);
  const std::string config_text = serialize_config(cfg);
  const std::string config_path = path_join(dir, "config.txt");
  const std::string log_path = path_join(dir, "runlog.jsonl");
  const std::string ckpt_path = path_join(dir, "checkpoint.cdck");
  write_text_file(config_path, config_text);

  io::RunLog log(log_path);
  training::TrainState state = training::make_train_state(cfg);
  auto save = [&](training::TrainState& st) {
    Checkpoint ck = checkpoint_from_model(*st.model, config_text);
    save_checkpoint(ck, ckpt_path);
  };
  training::FitResult fit = training::fit(
      cfg, train_set, state, &log, [&](int epoch, training::TrainState& st) {
        if (epoch % cfg.checkpoint_every == 0 && epoch != cfg.epochs) save(st);
      });
  save(state);  // final weights always land on disk, including epochs = 0
  if (artifacts != nullptr) {
    artifacts->checkpoint_path = ckpt_path;
    artifacts->config_path = config_path;
    artifacts->log_path = log_path;
    artifacts->fit = fit;
  }
  return state;
}

TrainArtifacts run_train(const RunConfig& cfg) {
  TrainArtifacts art;
  data::Dataset train_set = resolve_train_dataset(cfg);
  train_to_dir(cfg, train_set, cfg.out_dir, &art);
  return art;
}

EvalReport evaluate_model(const RunConfig& cfg, SegDiffusionModel<float>& model,
                          const data::Dataset& eval_set, int best_of) {
  if (eval_set.samples.empty()) throw std::invalid_argument("evaluate_model: empty dataset");
  auto schedule = diffusion::make_schedule(cfg.T, cfg.beta_start, cfg.beta_end);
  const auto ccfg = cfg.to_consensus_config();
  const int K = eval_set.num_classes;
  const int H = eval_set.height(), W = eval_set.width();
  const int64_t hw = static_cast<int64_t>(H) * W;

  EvalReport rep;
  rep.best_of = best_of;
  metrics::ConfusionCounts pooled(K);
  std::vector<double> best1;
  RngStream rng = RngStream(cfg.seed).fork(0x6576616cULL);

  std::vector<int> all(eval_set.size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  for (size_t off = 0; off < all.size(); off += static_cast<size_t>(cfg.eval_batch)) {
    const size_t end = std::min(all.size(), off + static_cast<size_t>(cfg.eval_batch));
    const std::vector<int> idx(all.begin() + static_cast<std::ptrdiff_t>(off),
                               all.begin() + static_cast<std::ptrdiff_t>(end));
    Tensor<float> images = data::stack_images(eval_set, idx);
    Tensor<int> gts = data::stack_masks(eval_set, idx);
    RngStream chunk_rng = rng.fork(off);
    sampling::BestOfResult r = sampling::best_of_n(model, images, gts, schedule, best_of,
                                                   chunk_rng, ccfg, cfg.sample_stride);
    for (size_t b = 0; b < idx.size(); ++b) {
      Tensor<int> pred({1, H, W}), gt({1, H, W});
      std::copy(r.labels.data() + static_cast<int64_t>(b) * hw,
                r.labels.data() + static_cast<int64_t>(b + 1) * hw, pred.data());
      std::copy(gts.data() + static_cast<int64_t>(b) * hw,
                gts.data() + static_cast<int64_t>(b + 1) * hw, gt.data());
      auto counts = metrics::confusion_labels(pred, gt, K);
      pooled += counts;
      rep.per_case_dice.push_back(metrics::dice_mean_foreground(counts));
      rep.per_case_miou.push_back(metrics::miou_foreground(counts));
      best1.push_back(r.first_dice[b]);
    }
  }

  rep.cases = static_cast<int>(rep.per_case_dice.size());
  for (double d : rep.per_case_dice) rep.dice_case_mean += d;
  rep.dice_case_mean /= rep.cases;
  for (double d : rep.per_case_miou) rep.miou_case_mean += d;
  rep.miou_case_mean /= rep.cases;
  for (double d : best1) rep.dice_best1_case_mean += d;
  rep.dice_best1_case_mean /= rep.cases;
  rep.per_class_dice = metrics::dice_per_class(pooled);
  rep.per_class_iou = metrics::iou_per_class(pooled);
  rep.dice_pooled = metrics::dice_mean_foreground(pooled);
  rep.miou_pooled = metrics::miou_foreground(pooled);
  rep.median_best_dice = median(rep.per_case_dice);
  rep.median_best1_dice = median(best1);
  return rep;
}

std::string EvalReport::to_json() const {
  nlohmann::json j{{"cases", cases},
                   {"best_of", best_of},
                   {"dice_case_mean", dice_case_mean},
                   {"miou_case_mean", miou_case_mean},
                   {"dice_pooled", dice_pooled},
                   {"miou_pooled", miou_pooled},
                   {"per_class_dice", per_class_dice},
                   {"per_class_iou", per_class_iou},
                   {"dice_best1_case_mean", dice_best1_case_mean},
                   {"median_best_dice", median_best_dice},
                   {"median_best1_dice", median_best1_dice},
                   {"per_case_dice", per_case_dice}};
  return j.dump(2);
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1);
  os << "Method                          F-1     mIoU\n";
  os << "condiff (best-of-" << best_of << ")            " << 100.0 * dice_case_mean << "    "
     << 100.0 * miou_case_mean << "\n";
  os << "condiff (best-of-1, paired)     " << 100.0 * dice_best1_case_mean << "    -\n\n";
  os << "per-class (pooled counts):\n";
  os << std::setprecision(3);
  for (size_t k = 0; k < per_class_dice.size(); ++k)
    os << "  class " << k << (k == 0 ? " (background)" : "") << ": Dice " << per_class_dice[k]
       << "  IoU " << per_class_iou[k] << "\n";
  os << "cases: " << cases << ", case-averaged; pooled F-1 " << std::setprecision(1)
     << 100.0 * dice_pooled << ", pooled mIoU " << 100.0 * miou_pooled << "\n";
  return os.str();
}

EvalReport run_eval(const RunConfig& cfg, const std::string& checkpoint_path) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  RngStream init(cfg.seed);
  SegDiffusionModel<float> model(cfg.to_model_config(), init);
  load_into_model(ckpt, model);
  data::Dataset val = resolve_val_dataset(cfg);
  EvalReport rep = evaluate_model(cfg, model, val, cfg.best_of);

  io::ensure_dir(cfg.out_dir);
  write_text_file(path_join(cfg.out_dir, "eval_report.json"), rep.to_json() + "\n");
  write_text_file(path_join(cfg.out_dir, "eval_report.txt"), rep.to_table());
  write_text_file(path_join(cfg.out_dir, "config.txt"), serialize_config(cfg));

  if (cfg.export_masks) {
    const std::string mask_dir = path_join(cfg.out_dir, "masks");
    io::ensure_dir(mask_dir);
    auto schedule = diffusion::make_schedule(cfg.T, cfg.beta_start, cfg.beta_end);
    const auto ccfg = cfg.to_consensus_config();
    RngStream rng = RngStream(cfg.seed).fork(0x6d61736bULL);
    for (size_t i = 0; i < val.size(); ++i) {
      Tensor<float> image = data::stack_images(val, {static_cast<int>(i)});
      RngStream case_rng = rng.fork(i);
      auto s = sampling::sample(model, image, schedule, case_rng, ccfg, cfg.sample_stride,
                                /*keep_trace=*/false);
      io::write_pgm(path_join(mask_dir, val.samples[i].id + ".pgm"), s.labels, 0);
    }
    io::write_class_map(path_join(mask_dir, "classes.txt"), val.num_classes);
  }
  return rep;
}

AblateReport run_ablate(const RunConfig& cfg, int seeds) {
  data::Dataset train_set = resolve_train_dataset(cfg);
  data::Dataset val_set = resolve_val_dataset(cfg);

  const std::vector<std::pair<std::string, std::pair<std::string, std::string>>> variants = {
      {"none", {"none", "additive"}},
      {"concat", {"pvt", "concat"}},
      {"additive", {"pvt", "additive"}},
  };

  AblateReport rep;
  rep.seeds = seeds;
  for (const auto& [name, modes] : variants) {
    AblateRow row;
    row.variant = name;
    double dice_sum = 0, miou_sum = 0;
    for (int s = 0; s < seeds; ++s) {
      RunConfig vcfg = cfg;
      vcfg.conditioning = modes.first;
      vcfg.fusion_mode = modes.second;
      vcfg.seed = cfg.seed + static_cast<uint64_t>(s);
      vcfg.out_dir = path_join(cfg.out_dir, name + "_seed" + std::to_string(vcfg.seed));
      training::TrainState state = train_to_dir(vcfg, train_set, vcfg.out_dir);
      EvalReport er = evaluate_model(vcfg, *state.model, val_set, cfg.best_of);
      row.per_seed_dice.push_back(er.dice_case_mean);
      dice_sum += er.dice_case_mean;
      miou_sum += er.miou_case_mean;
    }
    row.f1 = 100.0 * dice_sum / seeds;
    row.miou = 100.0 * miou_sum / seeds;
    rep.rows.push_back(std::move(row));
  }

  io::ensure_dir(cfg.out_dir);
  write_text_file(path_join(cfg.out_dir, "ablate_report.json"), rep.to_json() + "\n");
  write_text_file(path_join(cfg.out_dir, "ablate_report.txt"), rep.to_table());
  return rep;
}

std::string AblateReport::to_json() const {
  nlohmann::json jrows = nlohmann::json::array();
  for (const auto& r : rows) {
    jrows.push_back(nlohmann::json{{"variant", r.variant},
                                   {"f1", r.f1},
                                   {"miou", r.miou},
                                   {"per_seed_dice", r.per_seed_dice}});
  }
  return nlohmann::json{{"seeds", seeds}, {"rows", jrows}}.dump(2);
}

std::string AblateReport::to_table() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1);
  os << "PVT-Ac   PVT-Cc   F-1     mIoU\n";
  for (const auto& r : rows) {
    const char* ac = r.variant == "additive" ? "x" : "-";
    const char* cc = r.variant == "concat" ? "x" : "-";
    os << "  " << ac << "        " << cc << "      " << std::setw(5) << r.f1 << "   "
       << std::setw(5) << r.miou << "\n";
  }
  os << "(mean over " << seeds << " seeds, best-of-n per config)\n";
  return os.str();
}

profiling::ProfileReport run_profile(const RunConfig& cfg) {
  RngStream init(cfg.seed);
  SegDiffusionModel<float> model(cfg.to_model_config(), init);
  auto schedule = diffusion::make_schedule(cfg.T, cfg.beta_start, cfg.beta_end);
  auto rep = profiling::profile(model, schedule, cfg.profile_resolution, cfg.profile_batch,
                                cfg.profile_warmup, cfg.profile_iters, cfg.seed);
  io::ensure_dir(cfg.out_dir);
  write_text_file(path_join(cfg.out_dir, "profile_report.json"), rep.to_json() + "\n");
  write_text_file(path_join(cfg.out_dir, "profile_report.txt"), rep.to_table());
  return rep;
}

std::string run_gendata(const RunConfig& cfg, const std::string& out_path) {
  const int div = cfg.to_model_config().adapter.cumulative_stride();
  data::Dataset ds =
      data::generate_synthetic(cfg.train_n, cfg.classes, cfg.data_size, cfg.data_size,
                               RngStream(cfg.data_seed).fork(1).next_u64(), cfg.rare_rate, div);
  data::save_dataset(ds, out_path);
  return out_path;
}

SampleArtifacts run_sample(const RunConfig& cfg, const std::string& checkpoint_path, int count,
                           bool dump_trace) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  RngStream init(cfg.seed);
  SegDiffusionModel<float> model(cfg.to_model_config(), init);
  load_into_model(ckpt, model);
  data::Dataset val = resolve_val_dataset(cfg);
  if (val.samples.empty()) throw std::invalid_argument("run_sample: empty dataset");
  count = std::min<int>(count, static_cast<int>(val.size()));

  auto schedule = diffusion::make_schedule(cfg.T, cfg.beta_start, cfg.beta_end);
  const auto ccfg = cfg.to_consensus_config();
  const std::string mask_dir = path_join(cfg.out_dir, "masks");
  io::ensure_dir(mask_dir);

  SampleArtifacts art;
  RngStream rng = RngStream(cfg.seed).fork(0x73616d706cULL);
  for (int i = 0; i < count; ++i) {
    Tensor<float> image = data::stack_images(val, {i});
    RngStream case_rng = rng.fork(static_cast<uint64_t>(i));
    const bool keep = dump_trace && i == 0;
    auto s = sampling::sample(model, image, schedule, case_rng, ccfg, cfg.sample_stride, keep);
    const std::string p = path_join(mask_dir, val.samples[static_cast<size_t>(i)].id + ".pgm");
    io::write_pgm(p, s.labels, 0);
    art.mask_paths.push_back(p);
    if (keep) {
      const std::string trace_dir = path_join(cfg.out_dir, "trace");
      io::ensure_dir(trace_dir);
      for (size_t e = 0; e < s.trace.entries.size(); ++e) {
        Tensor<int> lbl = diffusion::argmax_labels(s.trace.entries[e]);
        const std::string tp = path_join(trace_dir, "step_" + std::to_string(e) + ".pgm");
        io::write_pgm(tp, lbl, 0);
        art.trace_paths.push_back(tp);
      }
    }
  }
  art.class_map_path = path_join(mask_dir, "classes.txt");
  io::write_class_map(art.class_map_path, val.num_classes);
  return art;
}

}  // namespace condiff::commands
