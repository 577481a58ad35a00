#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "igrl/corpus.hpp"
#include "igrl/policy.hpp"
#include "igrl/rewards.hpp"

namespace igrl {

struct GrpoConfig {
  int group_size = 6;
  double kl_beta = 0.04;
  double advantage_epsilon = 1e-8;
  double learning_rate = 5e-5;
  int steps = 300;
  double grad_clip_norm = 0.1;
  RewardMode mode = RewardMode::InfoGain;
  uint64_t seed = 0;
  int checkpoint_every = 0;  // 0 disables periodic checkpoints

  void validate() const;
};

struct TrajectoryMember {
  std::vector<int> tokens;  // sampled continuation, end token included
  StructuredOutput parsed;
  RewardBreakdown reward;
  std::vector<double> snapshot_logprobs;  // realized-token log-probs under the rollout snapshot
  double advantage = 0.0;
  double logit_reasoning = 0.0;
  double logit_direct = 0.0;
};

struct TrajectoryGroup {
  std::string task_id;
  std::vector<int> context;  // shared reasoning-mode context
  std::vector<TrajectoryMember> members;
};

// Samples group_size trajectories from the reasoning-mode context of the task
// and scores each with the same snapshot. Deterministic in (cfg.seed, step,
// task id, member index).
TrajectoryGroup rollout_group(const PolicyParams& snapshot, const Vocab& vocab,
                              const TaskInstance& task, const GrpoConfig& cfg,
                              const SamplerConfig& sampler, const InfoGainConfig& info,
                              const DistanceRewardConfig& dist, uint64_t step);

// A_i = (R_i - mean) / (population std + epsilon).
void compute_advantages(TrajectoryGroup& group, double epsilon);

// Per-token estimator exp(d) - d - 1 with d = logprob_old - logprob_live,
// averaged over tokens. Non-negative by convexity.
double kl_estimate(std::span<const double> logprobs_old, std::span<const double> logprobs_live);

double kl_penalty_term(const PolicyParams& live, const PolicyParams& snapshot,
                       std::span<const int> context, std::span<const int> tokens);

struct GrpoSurrogate {
  double value = 0.0;  // mean over members of A_i * log pi(o_i|q) - beta * KL_i
  GradBuffer grad;     // exact gradient of value w.r.t. live params
  double mean_kl = 0.0;
};

// The frozen-trajectory objective: advantages, sampled tokens and snapshot
// log-probs are all held fixed; only the live policy varies.
GrpoSurrogate grpo_surrogate(const PolicyParams& live, std::span<const TrajectoryGroup> groups,
                             const GrpoConfig& cfg);

struct GrpoStepStats {
  double reward_mean = 0.0;
  double reward_std = 0.0;
  double mean_dq = 0.0;
  double mean_kl = 0.0;
  double grad_norm = 0.0;  // pre-clip
  double mean_modulation = 0.0;
  double mean_legal = 0.0;
  double mean_logit_direct = 0.0;
  double mean_logit_reasoning = 0.0;
};

// One ascent step on the surrogate with global-norm clipping. Throws on a
// non-finite gradient.
GrpoStepStats grpo_update(PolicyParams& live, std::span<const TrajectoryGroup> groups,
                          const GrpoConfig& cfg);

struct GrpoStepRecord {
  int step = 0;
  std::string task_id;
  RewardMode mode = RewardMode::InfoGain;
  std::vector<double> rewards;
  std::vector<double> advantages;
  std::vector<RewardBreakdown> breakdowns;
  std::vector<size_t> lengths;
  GrpoStepStats stats;
};

struct GrpoRunHooks {
  std::function<void(const GrpoStepRecord&)> on_step;
  std::function<void(int step, const PolicyParams&)> on_checkpoint;
};

// Outer loop: shuffled task epochs, snapshot refresh every step, rollout,
// advantages, update. Hooks receive per-step records and periodic
// checkpoints.
void run_grpo(PolicyParams& params, const Vocab& vocab, const std::vector<TaskInstance>& suite,
              const GrpoConfig& cfg, const SamplerConfig& sampler, const InfoGainConfig& info,
              const DistanceRewardConfig& dist, const GrpoRunHooks& hooks = {});

}  // namespace igrl
