#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "igrl/corpus.hpp"
#include "igrl/grpo.hpp"
#include "igrl/policy.hpp"
#include "igrl/rewards.hpp"
#include "igrl/sft.hpp"

namespace igrl {

// Full run configuration, one nested block per module. Parsed from a flat
// key=value file with dotted keys; unknown or ill-typed keys are rejected
// before anything is written.
struct RunConfig {
  uint64_t seed = 42;

  struct Corpus {
    std::map<TaskKind, int> train_counts = {{TaskKind::MultiLabel, 25},
                                            {TaskKind::NumericDistance, 25},
                                            {TaskKind::MultipleChoice, 25},
                                            {TaskKind::NumericExact, 25}};
    std::map<TaskKind, int> eval_counts = {{TaskKind::MultiLabel, 10},
                                           {TaskKind::NumericDistance, 10},
                                           {TaskKind::MultipleChoice, 10},
                                           {TaskKind::NumericExact, 10}};
    int sft_traces = 450;
  } corpus;

  struct Policy {
    int d_model = 64;
    int n_layers = 2;
    int n_heads = 4;
    int max_seq = 256;
    double init_std = 0.05;
  } policy;

  struct Sampler {
    double temperature = 0.9;
    double top_p = 0.9;
    int max_new_tokens = 64;
  } sampler;

  struct Sft {
    double learning_rate = 5e-5;
    int batch_size = 2;
    int epochs = 3;
    LrSchedule schedule = LrSchedule::CosineWarmup;
    double warmup_ratio = 0.1;
    double momentum = 0.9;
  } sft;

  struct Grpo {
    int group_size = 6;
    double kl_beta = 0.04;
    double advantage_epsilon = 1e-8;
    double learning_rate = 5e-5;
    int steps = 300;
    double grad_clip_norm = 0.1;
    int checkpoint_every = 100;
  } grpo;

  struct Rewards {
    double info_temperature = 0.2;
    double distance_c = 36.0;
    RewardMode mode = RewardMode::InfoGain;
  } rewards;

  struct Telemetry {
    double numeric_band = 0.05;
  } telemetry;

  struct Paths {
    std::string corpus_dir = "corpus";
  } paths;

  PolicyConfig policy_config(int vocab_size) const;
  SamplerConfig sampler_config(uint64_t sample_seed) const;
  SftConfig sft_config() const;
  GrpoConfig grpo_config() const;
  InfoGainConfig info_config() const;
  DistanceRewardConfig distance_config() const;

  // Canonical key=value view (sorted keys), the input to config_hash.
  std::map<std::string, std::string> to_kv() const;
  uint64_t config_hash() const;

  void validate() const;
};

// Parses a key=value file ('#' comments, blank lines allowed) over the
// defaults. Throws with the offending key name on unknown keys, bad types or
// bad values.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

std::string hash_hex(uint64_t h);

}  // namespace igrl
