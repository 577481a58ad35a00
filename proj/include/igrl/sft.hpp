#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "igrl/corpus.hpp"
#include "igrl/policy.hpp"

namespace igrl {

enum class LrSchedule { Constant, CosineWarmup };

struct SftConfig {
  double learning_rate = 5e-5;
  int batch_size = 2;
  int epochs = 3;
  LrSchedule schedule = LrSchedule::CosineWarmup;
  double warmup_ratio = 0.1;
  double momentum = 0.9;
  uint64_t seed = 0;

  void validate() const;
};

// Mean per-token negative log-likelihood of the targets given their contexts.
// Context tokens contribute no loss.
double sft_loss(const PolicyParams& params, std::span<const SftTrace> batch);

struct SftOptState {
  std::vector<double> velocity;
};

// One SGD(+momentum) step on a batch; returns the batch mean NLL per token.
// Passing a null opt state runs plain SGD.
double sft_step(PolicyParams& params, std::span<const SftTrace> batch, double lr,
                double momentum = 0.0, SftOptState* opt = nullptr);

double lr_at_step(const SftConfig& cfg, int step, int total_steps);

struct SftRunResult {
  std::vector<double> loss_curve;  // one entry per optimizer step
};

// Seeded shuffling per epoch, scheduled learning rate, per-step loss curve.
SftRunResult run_sft(PolicyParams& params, const std::vector<SftTrace>& traces,
                     const SftConfig& cfg);

}  // namespace igrl
