#include "igrl/sft.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "igrl/rng.hpp"

namespace igrl {

void SftConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
  if (epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  if (warmup_ratio < 0.0 || warmup_ratio >= 1.0) {
    throw std::invalid_argument("warmup_ratio must be in [0, 1)");
  }
  if (momentum < 0.0 || momentum >= 1.0) {
    throw std::invalid_argument("momentum must be in [0, 1)");
  }
}

namespace {

size_t batch_token_count(std::span<const SftTrace> batch) {
  size_t n = 0;
  for (const auto& trace : batch) {
    n += trace.target.size();
  }
  return n;
}

}  // namespace

double sft_loss(const PolicyParams& params, std::span<const SftTrace> batch) {
  if (batch.empty()) {
    throw std::invalid_argument("batch must be non-empty");
  }
  double nll = 0.0;
  for (const auto& trace : batch) {
    for (const auto& e : teacher_forced_logits(params, trace.context, trace.target)) {
      nll -= e.logprob;
    }
  }
  return nll / static_cast<double>(batch_token_count(batch));
}

double sft_step(PolicyParams& params, std::span<const SftTrace> batch, double lr,
                double momentum, SftOptState* opt) {
  if (batch.empty()) {
    throw std::invalid_argument("batch must be non-empty");
  }
  const double inv_tokens = 1.0 / static_cast<double>(batch_token_count(batch));

  GradBuffer grad = params.zero_grad();
  double loss = 0.0;
  for (const auto& trace : batch) {
    const std::vector<double> weights(trace.target.size(), -inv_tokens);
    loss += weighted_logprob_grad(params, trace.context, trace.target, weights, grad);
  }

  if (opt != nullptr && momentum > 0.0) {
    if (opt->velocity.size() != grad.size()) {
      opt->velocity.assign(grad.size(), 0.0);
    }
    for (size_t i = 0; i < grad.size(); ++i) {
      opt->velocity[i] = momentum * opt->velocity[i] + grad[i];
    }
    sgd_step(params, opt->velocity, lr);
  } else {
    sgd_step(params, grad, lr);
  }
  return loss;
}

double lr_at_step(const SftConfig& cfg, int step, int total_steps) {
  if (cfg.schedule == LrSchedule::Constant || total_steps <= 0) {
    return cfg.learning_rate;
  }
  const int warmup = static_cast<int>(cfg.warmup_ratio * total_steps);
  if (step < warmup) {
    return cfg.learning_rate * static_cast<double>(step + 1) / static_cast<double>(warmup);
  }
  if (total_steps == warmup) {
    return cfg.learning_rate;
  }
  const double progress =
      static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
  const double pi = 3.14159265358979323846;
  return cfg.learning_rate * 0.5 * (1.0 + std::cos(pi * progress));
}

SftRunResult run_sft(PolicyParams& params, const std::vector<SftTrace>& traces,
                     const SftConfig& cfg) {
  cfg.validate();
  if (traces.empty()) {
    throw std::invalid_argument("traces must be non-empty");
  }
  SftRunResult result;
  const int n = static_cast<int>(traces.size());
  const int steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const int total_steps = cfg.epochs * steps_per_epoch;

  SftOptState opt;
  std::vector<int> order(traces.size());
  std::iota(order.begin(), order.end(), 0);

  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(Rng::mix(cfg.seed, 0x5f74 + static_cast<uint64_t>(epoch)));
    rng.shuffle(order);
    for (int start = 0; start < n; start += cfg.batch_size) {
      std::vector<SftTrace> batch;
      for (int i = start; i < std::min(n, start + cfg.batch_size); ++i) {
        batch.push_back(traces[static_cast<size_t>(order[static_cast<size_t>(i)])]);
      }
      const double lr = lr_at_step(cfg, step, total_steps);
      result.loss_curve.push_back(sft_step(params, batch, lr, cfg.momentum, &opt));
      ++step;
    }
  }
  return result;
}

}  // namespace igrl
