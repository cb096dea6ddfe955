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

#include "condiff/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace condiff {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string join_ints(const std::vector<int>& v) {
  std::ostringstream os;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) os << ",";
    os << v[i];
  }
  return os.str();
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Field {
  std::function<bool(RunConfig&, const std::string&)> set;  // false on bad value
  std::function<std::string(const RunConfig&)> get;
};

bool parse_int(const std::string& v, int& out) {
  try {
    size_t pos = 0;
    out = std::stoi(v, &pos);
    return pos == v.size();
  } catch (...) {
    return false;
  }
}

bool parse_u64(const std::string& v, uint64_t& out) {
  try {
    size_t pos = 0;
    out = std::stoull(v, &pos);
    return pos == v.size();
  } catch (...) {
    return false;
  }
}

bool parse_double(const std::string& v, double& out) {
  try {
    size_t pos = 0;
    out = std::stod(v, &pos);
    return pos == v.size();
  } catch (...) {
    return false;
  }
}

bool parse_bool(const std::string& v, bool& out) {
  if (v == "true" || v == "1") {
    out = true;
    return true;
  }
  if (v == "false" || v == "0") {
    out = false;
    return true;
  }
  return false;
}

bool parse_int_list(const std::string& v, std::vector<int>& out) {
  std::vector<int> parsed;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int x;
    if (!parse_int(trim(item), x)) return false;
    parsed.push_back(x);
  }
  if (parsed.empty()) return false;
  out = std::move(parsed);
  return true;
}

#define INT_FIELD(member)                                                       \
  Field{[](RunConfig& c, const std::string& v) { return parse_int(v, c.member); }, \
        [](const RunConfig& c) { return std::to_string(c.member); }}
#define U64_FIELD(member)                                                       \
  Field{[](RunConfig& c, const std::string& v) { return parse_u64(v, c.member); }, \
        [](const RunConfig& c) { return std::to_string(c.member); }}
#define DBL_FIELD(member)                                                          \
  Field{[](RunConfig& c, const std::string& v) { return parse_double(v, c.member); }, \
        [](const RunConfig& c) { return fmt_double(c.member); }}
#define BOOL_FIELD(member)                                                       \
  Field{[](RunConfig& c, const std::string& v) { return parse_bool(v, c.member); }, \
        [](const RunConfig& c) { return c.member ? std::string("true") : std::string("false"); }}
#define STR_FIELD(member)                             \
  Field{[](RunConfig& c, const std::string& v) {      \
          c.member = v;                               \
          return true;                                \
        },                                            \
        [](const RunConfig& c) { return c.member; }}
#define LIST_FIELD(member)                                                            \
  Field{[](RunConfig& c, const std::string& v) { return parse_int_list(v, c.member); }, \
        [](const RunConfig& c) { return join_ints(c.member); }}

// Canonical key order doubles as the serialization order.
const std::vector<std::pair<std::string, Field>>& schema() {
  static const std::vector<std::pair<std::string, Field>> s = {
      {"run.seed", U64_FIELD(seed)},
      {"run.out_dir", STR_FIELD(out_dir)},
      {"schedule.T", INT_FIELD(T)},
      {"schedule.beta_start", DBL_FIELD(beta_start)},
      {"schedule.beta_end", DBL_FIELD(beta_end)},
      {"model.classes", INT_FIELD(classes)},
      {"model.image_channels", INT_FIELD(image_channels)},
      {"model.fusion_mode", STR_FIELD(fusion_mode)},
      {"model.conditioning", STR_FIELD(conditioning)},
      {"model.time_dim", INT_FIELD(time_dim)},
      {"adapter.stage_dims", LIST_FIELD(stage_dims)},
      {"adapter.strides", LIST_FIELD(strides)},
      {"adapter.reduction_ratios", LIST_FIELD(reduction_ratios)},
      {"adapter.heads", LIST_FIELD(heads)},
      {"adapter.depths", LIST_FIELD(depths)},
      {"adapter.mlp_ratio", INT_FIELD(mlp_ratio)},
      {"denoiser.channels", LIST_FIELD(denoiser_channels)},
      {"loss.lambda_dice", DBL_FIELD(lambda_dice)},
      {"loss.lambda_ce", DBL_FIELD(lambda_ce)},
      {"loss.dice_smooth", DBL_FIELD(dice_smooth)},
      {"optim.lr", DBL_FIELD(lr)},
      {"optim.weight_decay", DBL_FIELD(weight_decay)},
      {"optim.beta1", DBL_FIELD(beta1)},
      {"optim.beta2", DBL_FIELD(beta2)},
      {"optim.eps", DBL_FIELD(adam_eps)},
      {"optim.clip_norm", DBL_FIELD(clip_norm)},
      {"train.epochs", INT_FIELD(epochs)},
      {"train.batch_size", INT_FIELD(batch_size)},
      {"train.checkpoint_every", INT_FIELD(checkpoint_every)},
      {"train.log_every", INT_FIELD(log_every)},
      {"consensus.mode", STR_FIELD(consensus_mode)},
      {"consensus.k", INT_FIELD(consensus_k)},
      {"sampling.stride", INT_FIELD(sample_stride)},
      {"eval.best_of", INT_FIELD(best_of)},
      {"eval.batch", INT_FIELD(eval_batch)},
      {"eval.export_masks", BOOL_FIELD(export_masks)},
      {"data.source", STR_FIELD(data_source)},
      {"data.path", STR_FIELD(data_path)},
      {"data.train_n", INT_FIELD(train_n)},
      {"data.val_n", INT_FIELD(val_n)},
      {"data.size", INT_FIELD(data_size)},
      {"data.seed", U64_FIELD(data_seed)},
      {"data.rare_rate", DBL_FIELD(rare_rate)},
      {"profile.warmup", INT_FIELD(profile_warmup)},
      {"profile.iters", INT_FIELD(profile_iters)},
      {"profile.resolution", INT_FIELD(profile_resolution)},
      {"profile.batch", INT_FIELD(profile_batch)},
  };
  return s;
}

const Field* find_field(const std::string& key) {
  for (const auto& [k, f] : schema())
    if (k == key) return &f;
  return nullptr;
}

}  // namespace

ModelConfig RunConfig::to_model_config() const {
  ModelConfig m;
  m.adapter.stage_dims = stage_dims;
  m.adapter.stage_strides = strides;
  m.adapter.reduction_ratios = reduction_ratios;
  m.adapter.num_heads = heads;
  m.adapter.depths = depths;
  m.adapter.mlp_ratio = mlp_ratio;
  m.adapter.fusion_mode = fusion_mode == "concat" ? FusionMode::kConcat : FusionMode::kAdditive;
  m.denoiser.channels = denoiser_channels;
  m.denoiser.time_dim = time_dim;
  m.denoiser.num_classes = classes;
  m.image_channels = image_channels;
  m.conditioned = conditioning != "none";
  return m;
}

sampling::ConsensusConfig RunConfig::to_consensus_config() const {
  sampling::ConsensusConfig c;
  c.mode = consensus_mode == "majority-vote" ? sampling::ConsensusMode::kMajorityVote
                                             : sampling::ConsensusMode::kMeanLastK;
  c.k = consensus_k;
  return c;
}

RunConfig parse_config_text(const std::string& text, std::vector<std::string>& errors) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const Field* f = find_field(key);
    if (f == nullptr) {
      errors.push_back("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
      continue;
    }
    if (!f->set(cfg, value))
      errors.push_back("line " + std::to_string(lineno) + ": bad value for '" + key + "': " + value);
  }
  return cfg;
}

RunConfig load_config_file(const std::string& path, std::vector<std::string>& errors) {
  std::ifstream f(path);
  if (!f) {
    errors.push_back("cannot open config file: " + path);
    return RunConfig{};
  }
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str(), errors);
}

void apply_override(RunConfig& cfg, const std::string& key_value,
                    std::vector<std::string>& errors) {
  const auto eq = key_value.find('=');
  if (eq == std::string::npos) {
    errors.push_back("override must be key=value: " + key_value);
    return;
  }
  const std::string key = trim(key_value.substr(0, eq));
  const std::string value = trim(key_value.substr(eq + 1));
  const Field* f = find_field(key);
  if (f == nullptr) {
    errors.push_back("unknown key '" + key + "'");
    return;
  }
  if (!f->set(cfg, value)) errors.push_back("bad value for '" + key + "': " + value);
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream os;
  std::string section;
  for (const auto& [k, f] : schema()) {
    const std::string sec = k.substr(0, k.find('.'));
    if (sec != section) {
      if (!section.empty()) os << "\n";
      section = sec;
    }
    os << k << " = " << f.get(cfg) << "\n";
  }
  return os.str();
}

std::vector<std::string> validate_config(const RunConfig& cfg) {
  std::vector<std::string> errs;
  if (cfg.T < 1) errs.push_back("schedule.T must be >= 1");
  if (!(cfg.beta_start > 0.0 && cfg.beta_end < 1.0 && cfg.beta_start <= cfg.beta_end))
    errs.push_back("schedule betas must satisfy 0 < beta_start <= beta_end < 1");
  if (cfg.fusion_mode != "additive" && cfg.fusion_mode != "concat")
    errs.push_back("model.fusion_mode must be 'additive' or 'concat'");
  if (cfg.conditioning != "pvt" && cfg.conditioning != "none")
    errs.push_back("model.conditioning must be 'pvt' or 'none'");
  if (cfg.classes < 2) errs.push_back("model.classes must be >= 2");
  if (cfg.image_channels < 1) errs.push_back("model.image_channels must be >= 1");
  if (cfg.time_dim < 2 || cfg.time_dim % 2 != 0)
    errs.push_back("model.time_dim must be a positive even integer");

  ModelConfig m = cfg.to_model_config();
  for (auto& e : m.validate()) errs.push_back(e);

  if (cfg.lambda_dice < 0 || cfg.lambda_ce < 0)
    errs.push_back("loss weights must be non-negative");
  if (cfg.dice_smooth <= 0) errs.push_back("loss.dice_smooth must be positive");
  if (cfg.lr <= 0) errs.push_back("optim.lr must be positive");
  if (cfg.epochs < 0) errs.push_back("train.epochs must be >= 0");
  if (cfg.batch_size < 1) errs.push_back("train.batch_size must be >= 1");
  if (cfg.checkpoint_every < 1) errs.push_back("train.checkpoint_every must be >= 1");
  if (cfg.log_every < 1) errs.push_back("train.log_every must be >= 1");
  if (cfg.consensus_mode != "mean-last-k" && cfg.consensus_mode != "majority-vote")
    errs.push_back("consensus.mode must be 'mean-last-k' or 'majority-vote'");
  if (cfg.consensus_k < 1) errs.push_back("consensus.k must be >= 1");
  if (cfg.sample_stride < 1) errs.push_back("sampling.stride must be >= 1");
  if (cfg.best_of < 1) errs.push_back("eval.best_of must be >= 1");
  if (cfg.eval_batch < 1) errs.push_back("eval.batch must be >= 1");

  if (cfg.data_source != "synthetic" && cfg.data_source != "file")
    errs.push_back("data.source must be 'synthetic' or 'file'");
  if (cfg.data_source == "file" && cfg.data_path.empty())
    errs.push_back("data.path is required when data.source = file");
  if (cfg.data_source == "synthetic") {
    if (cfg.train_n < 1) errs.push_back("data.train_n must be >= 1");
    if (cfg.val_n < 0) errs.push_back("data.val_n must be >= 0");
    const int div = m.adapter.cumulative_stride();
    if (cfg.data_size < div || cfg.data_size % div != 0)
      errs.push_back("data.size must be divisible by the cumulative model stride " +
                     std::to_string(div));
    if (cfg.rare_rate < 0 || cfg.rare_rate > 1)
      errs.push_back("data.rare_rate must lie in [0, 1]");
  }
  if (cfg.profile_warmup < 0) errs.push_back("profile.warmup must be >= 0");
  if (cfg.profile_iters < 1) errs.push_back("profile.iters must be >= 1");
  if (cfg.profile_batch < 1) errs.push_back("profile.batch must be >= 1");
  {
    const int div = m.adapter.cumulative_stride();
    if (cfg.profile_resolution < div || cfg.profile_resolution % div != 0)
      errs.push_back("profile.resolution must be divisible by the cumulative model stride " +
                     std::to_string(div));
  }
  return errs;
}

}  // namespace condiff
