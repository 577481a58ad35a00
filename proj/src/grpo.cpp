#include "igrl/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "igrl/rng.hpp"

namespace igrl {

void GrpoConfig::validate() const {
  if (group_size < 2) throw std::invalid_argument("group_size must be >= 2");
  if (kl_beta < 0.0) throw std::invalid_argument("kl_beta must be non-negative");
  if (!(advantage_epsilon > 0.0)) throw std::invalid_argument("advantage_epsilon must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (steps < 0) throw std::invalid_argument("steps must be non-negative");
  if (!(grad_clip_norm > 0.0)) throw std::invalid_argument("grad_clip_norm must be positive");
  if (checkpoint_every < 0) throw std::invalid_argument("checkpoint_every must be non-negative");
}

TrajectoryGroup rollout_group(const PolicyParams& snapshot, const Vocab& vocab,
                              const TaskInstance& task, const GrpoConfig& cfg,
                              const SamplerConfig& sampler, const InfoGainConfig& info,
                              const DistanceRewardConfig& dist, uint64_t step) {
  cfg.validate();
  const PromptPair pair = render_prompts(vocab, task);
  InfoGainConfig effective_info = info;
  effective_info.mode = cfg.mode;

  TrajectoryGroup group;
  group.task_id = task.id;
  group.context = pair.reasoning_context_prefix;
  group.members.resize(cfg.group_size);

  const uint64_t task_salt = Rng::mix(Rng::hash_str(task.id.c_str()), step);
  for (int i = 0; i < cfg.group_size; ++i) {
    TrajectoryMember& m = group.members[static_cast<size_t>(i)];
    SamplerConfig member_sampler = sampler;
    member_sampler.seed = Rng::mix(Rng::mix(cfg.seed, task_salt), static_cast<uint64_t>(i));
    m.tokens = sample(snapshot, group.context, member_sampler, vocab.eos);

    DeltaQResult probe;
    m.reward = score_trajectory(snapshot, vocab, task, pair, m.tokens, effective_info, dist,
                                &probe);
    m.parsed = parse_structured_output(vocab, m.tokens);
    m.logit_reasoning = probe.logit_reasoning;
    m.logit_direct = probe.logit_direct;

    m.snapshot_logprobs.clear();
    for (const auto& e : teacher_forced_logits(snapshot, group.context, m.tokens)) {
      m.snapshot_logprobs.push_back(e.logprob);
    }
  }
  return group;
}

void compute_advantages(TrajectoryGroup& group, double epsilon) {
  if (group.members.empty()) {
    throw std::invalid_argument("group has no members");
  }
  const double n = static_cast<double>(group.members.size());
  double mean = 0.0;
  for (const auto& m : group.members) {
    mean += m.reward.total;
  }
  mean /= n;
  double var = 0.0;
  for (const auto& m : group.members) {
    const double c = m.reward.total - mean;
    var += c * c;
  }
  const double std_dev = std::sqrt(var / n);
  for (auto& m : group.members) {
    m.advantage = (m.reward.total - mean) / (std_dev + epsilon);
  }
}

double kl_estimate(std::span<const double> logprobs_old, std::span<const double> logprobs_live) {
  if (logprobs_old.size() != logprobs_live.size() || logprobs_old.empty()) {
    throw std::invalid_argument("kl_estimate: log-prob spans must be non-empty and equal length");
  }
  double acc = 0.0;
  for (size_t i = 0; i < logprobs_old.size(); ++i) {
    const double d = logprobs_old[i] - logprobs_live[i];
    acc += std::exp(d) - d - 1.0;
  }
  return acc / static_cast<double>(logprobs_old.size());
}

double kl_penalty_term(const PolicyParams& live, const PolicyParams& snapshot,
                       std::span<const int> context, std::span<const int> tokens) {
  const auto tf_live = teacher_forced_logits(live, context, tokens);
  const auto tf_old = teacher_forced_logits(snapshot, context, tokens);
  std::vector<double> lp_live(tf_live.size()), lp_old(tf_old.size());
  for (size_t i = 0; i < tf_live.size(); ++i) {
    lp_live[i] = tf_live[i].logprob;
    lp_old[i] = tf_old[i].logprob;
  }
  return kl_estimate(lp_old, lp_live);
}

GrpoSurrogate grpo_surrogate(const PolicyParams& live, std::span<const TrajectoryGroup> groups,
                             const GrpoConfig& cfg) {
  if (groups.empty()) {
    throw std::invalid_argument("no trajectory groups");
  }
  GrpoSurrogate s;
  s.grad = live.zero_grad();

  size_t members_total = 0;
  for (const auto& g : groups) {
    members_total += g.members.size();
  }
  const double inv_members = 1.0 / static_cast<double>(members_total);

  for (const auto& g : groups) {
    for (const auto& m : g.members) {
      const auto tf = teacher_forced_logits(live, g.context, m.tokens);
      const size_t K = tf.size();
      if (m.snapshot_logprobs.size() != K) {
        throw std::invalid_argument("snapshot log-prob length mismatch");
      }

      double sum_logprob = 0.0;
      double kl = 0.0;
      std::vector<double> weights(K);
      for (size_t k = 0; k < K; ++k) {
        sum_logprob += tf[k].logprob;
        const double d = m.snapshot_logprobs[k] - tf[k].logprob;
        kl += std::exp(d) - d - 1.0;
        // d(value)/d(logprob_k) for this member, before the member average.
        weights[k] = m.advantage -
                     cfg.kl_beta * (1.0 - std::exp(d)) / static_cast<double>(K);
        weights[k] *= inv_members;
      }
      kl /= static_cast<double>(K);
      s.value += inv_members * (m.advantage * sum_logprob - cfg.kl_beta * kl);
      s.mean_kl += inv_members * kl;
      weighted_logprob_grad(live, g.context, m.tokens, weights, s.grad);
    }
  }
  return s;
}

GrpoStepStats grpo_update(PolicyParams& live, std::span<const TrajectoryGroup> groups,
                          const GrpoConfig& cfg) {
  cfg.validate();
  GrpoSurrogate s = grpo_surrogate(live, groups, cfg);

  for (double g : s.grad) {
    if (!std::isfinite(g)) {
      throw std::runtime_error("grpo_update: non-finite gradient, step aborted");
    }
  }
  GrpoStepStats stats;
  stats.grad_norm = clip_grad_norm(s.grad, cfg.grad_clip_norm);
  stats.mean_kl = s.mean_kl;

  // Ascent on the surrogate.
  for (size_t i = 0; i < live.w.size(); ++i) {
    live.w[i] += cfg.learning_rate * s.grad[i];
  }
  if (!live.all_finite()) {
    throw std::runtime_error("grpo_update: non-finite parameter after update");
  }

  size_t n = 0;
  size_t n_defined = 0;
  double mean = 0.0;
  for (const auto& g : groups) {
    for (const auto& m : g.members) {
      mean += m.reward.total;
      stats.mean_modulation += m.reward.modulation;
      stats.mean_legal += m.reward.r_legal;
      if (m.reward.dq_defined) {
        stats.mean_dq += m.reward.delta_q;
        stats.mean_logit_direct += m.logit_direct;
        stats.mean_logit_reasoning += m.logit_reasoning;
        ++n_defined;
      }
      ++n;
    }
  }
  mean /= static_cast<double>(n);
  stats.reward_mean = mean;
  stats.mean_modulation /= static_cast<double>(n);
  stats.mean_legal /= static_cast<double>(n);
  if (n_defined > 0) {
    stats.mean_dq /= static_cast<double>(n_defined);
    stats.mean_logit_direct /= static_cast<double>(n_defined);
    stats.mean_logit_reasoning /= static_cast<double>(n_defined);
  }
  double var = 0.0;
  for (const auto& g : groups) {
    for (const auto& m : g.members) {
      const double c = m.reward.total - mean;
      var += c * c;
    }
  }
  stats.reward_std = std::sqrt(var / static_cast<double>(n));
  return stats;
}

void run_grpo(PolicyParams& params, const Vocab& vocab, const std::vector<TaskInstance>& suite,
              const GrpoConfig& cfg, const SamplerConfig& sampler, const InfoGainConfig& info,
              const DistanceRewardConfig& dist, const GrpoRunHooks& hooks) {
  cfg.validate();
  sampler.validate();
  if (suite.empty()) {
    throw std::invalid_argument("task suite must be non-empty");
  }

  std::vector<size_t> order(suite.size());
  std::iota(order.begin(), order.end(), 0);
  const size_t per_epoch = suite.size();

  for (int step = 0; step < cfg.steps; ++step) {
    const size_t slot = static_cast<size_t>(step) % per_epoch;
    if (slot == 0) {
      Rng rng(Rng::mix(cfg.seed, 0x6772 + static_cast<uint64_t>(step / per_epoch)));
      rng.shuffle(order);
    }
    const TaskInstance& task = suite[order[slot]];

    const PolicyParams snapshot = params;  // refreshed every outer step
    TrajectoryGroup group = rollout_group(snapshot, vocab, task, cfg, sampler, info, dist,
                                          static_cast<uint64_t>(step));
    compute_advantages(group, cfg.advantage_epsilon);

    const GrpoStepStats stats = grpo_update(params, std::span(&group, 1), cfg);

    if (hooks.on_step) {
      GrpoStepRecord rec;
      rec.step = step;
      rec.task_id = task.id;
      rec.mode = cfg.mode;
      for (const auto& m : group.members) {
        rec.rewards.push_back(m.reward.total);
        rec.advantages.push_back(m.advantage);
        rec.breakdowns.push_back(m.reward);
        rec.lengths.push_back(m.tokens.size());
      }
      rec.stats = stats;
      hooks.on_step(rec);
    }
    if (hooks.on_checkpoint && cfg.checkpoint_every > 0 &&
        (step + 1) % cfg.checkpoint_every == 0) {
      hooks.on_checkpoint(step + 1, params);
    }
  }
  if (hooks.on_checkpoint) {
    hooks.on_checkpoint(cfg.steps, params);
  }
}

}  // namespace igrl
