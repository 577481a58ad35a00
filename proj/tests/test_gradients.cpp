#include <doctest.h>

#include <cmath>
#include <vector>

#include "igrl/grpo.hpp"
#include "igrl/policy.hpp"
#include "igrl/rng.hpp"

using namespace igrl;

namespace {

PolicyConfig fd_config() {
  PolicyConfig cfg;
  cfg.vocab_size = 16;
  cfg.d_model = 8;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.max_seq = 32;
  cfg.init_std = 0.2;
  return cfg;
}

double sum_logprob(const PolicyParams& params, std::span<const int> ctx,
                   std::span<const int> cont) {
  double acc = 0.0;
  for (const auto& e : teacher_forced_logits(params, ctx, cont)) {
    acc += e.logprob;
  }
  return acc;
}

double rel_error(double a, double b) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-4});
}

std::vector<int> random_tokens(Rng& rng, int vocab, int len) {
  std::vector<int> out(static_cast<size_t>(len));
  for (int& id : out) {
    id = rng.uniform_int(vocab);
  }
  return out;
}

}  // namespace

TEST_CASE("analytic log-prob gradient matches central finite differences") {
  Rng rng(2024);
  PolicyParams params = PolicyParams::init(fd_config(), 31337);
  const auto ctx = random_tokens(rng, params.cfg.vocab_size, 5);
  const auto cont = random_tokens(rng, params.cfg.vocab_size, 7);

  const GradBuffer grad = grad_logprob(params, ctx, cont);

  const double h = 1e-4;
  int checked = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 220; ++trial) {
    const size_t i = static_cast<size_t>(rng.uniform_int(static_cast<int>(params.w.size())));
    const double keep = params.w[i];
    params.w[i] = keep + h;
    const double up = sum_logprob(params, ctx, cont);
    params.w[i] = keep - h;
    const double dn = sum_logprob(params, ctx, cont);
    params.w[i] = keep;
    const double fd = (up - dn) / (2 * h);
    worst = std::max(worst, rel_error(grad[i], fd));
    ++checked;
  }
  CHECK(checked >= 200);
  CHECK(worst < 1e-4);
}

TEST_CASE("zero-head model gradient matches the closed-form softmax derivative") {
  PolicyParams params = PolicyParams::init(fd_config(), 5);
  const int V = params.cfg.vocab_size;
  const int d = params.cfg.d_model;
  std::fill_n(params.at(params.layout.head_w), static_cast<size_t>(V) * d, 0.0);
  std::fill_n(params.at(params.layout.head_b), V, 0.0);

  const std::vector<int> ctx = {1, 2};
  const std::vector<int> cont = {3, 9, 3};
  const GradBuffer grad = grad_logprob(params, ctx, cont);

  // Features at the scoring positions come from the cached forward.
  std::vector<int> fed = ctx;
  fed.insert(fed.end(), cont.begin(), cont.end() - 1);
  const ForwardCache cache = forward_cached(params, fed);

  const double uniform = 1.0 / V;
  for (int v = 0; v < V; ++v) {
    double expect_b = 0.0;
    std::vector<double> expect_w(static_cast<size_t>(d), 0.0);
    for (size_t k = 0; k < cont.size(); ++k) {
      const size_t pos = ctx.size() - 1 + k;
      const double coeff = (v == cont[k] ? 1.0 : 0.0) - uniform;
      expect_b += coeff;
      for (int i = 0; i < d; ++i) {
        expect_w[static_cast<size_t>(i)] += coeff * cache.final_norm[pos * d + i];
      }
    }
    CHECK(grad[params.layout.head_b + v] == doctest::Approx(expect_b).epsilon(1e-9));
    for (int i = 0; i < d; ++i) {
      CHECK(grad[params.layout.head_w + static_cast<size_t>(v) * d + i] ==
            doctest::Approx(expect_w[static_cast<size_t>(i)]).epsilon(1e-9));
    }
  }
}

TEST_CASE("log-likelihood gradient is additive over a repeated continuation") {
  Rng rng(808);
  const PolicyParams params = PolicyParams::init(fd_config(), 77);
  const auto ctx = random_tokens(rng, params.cfg.vocab_size, 3);
  const auto half = random_tokens(rng, params.cfg.vocab_size, 4);

  std::vector<int> doubled = half;
  doubled.insert(doubled.end(), half.begin(), half.end());
  std::vector<int> carried = ctx;
  carried.insert(carried.end(), half.begin(), half.end());

  const GradBuffer full = grad_logprob(params, ctx, doubled);
  const GradBuffer first = grad_logprob(params, ctx, half);
  const GradBuffer second = grad_logprob(params, carried, half);

  for (size_t i = 0; i < full.size(); ++i) {
    CHECK(full[i] == doctest::Approx(first[i] + second[i]).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("weights scale the log-prob gradient linearly") {
  Rng rng(11);
  const PolicyParams params = PolicyParams::init(fd_config(), 13);
  const auto ctx = random_tokens(rng, params.cfg.vocab_size, 4);
  const auto cont = random_tokens(rng, params.cfg.vocab_size, 5);

  GradBuffer weighted = params.zero_grad();
  const std::vector<double> w(cont.size(), -2.5);
  weighted_logprob_grad(params, ctx, cont, w, weighted);
  const GradBuffer plain = grad_logprob(params, ctx, cont);
  for (size_t i = 0; i < weighted.size(); ++i) {
    CHECK(weighted[i] == doctest::Approx(-2.5 * plain[i]).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("frozen-trajectory surrogate gradient matches finite differences") {
  Rng rng(90210);
  PolicyParams params = PolicyParams::init(fd_config(), 4242);

  // Build two frozen groups by sampling from the snapshot.
  GrpoConfig cfg;
  cfg.group_size = 3;
  cfg.kl_beta = 0.05;
  cfg.seed = 7;
  SamplerConfig scfg;
  scfg.temperature = 1.0;
  scfg.top_p = 1.0;
  scfg.max_new_tokens = 5;

  std::vector<TrajectoryGroup> groups(2);
  for (size_t g = 0; g < groups.size(); ++g) {
    groups[g].task_id = "fixture";
    groups[g].context = random_tokens(rng, params.cfg.vocab_size, 4);
    for (int i = 0; i < cfg.group_size; ++i) {
      TrajectoryMember m;
      scfg.seed = Rng::mix(g, static_cast<uint64_t>(i));
      m.tokens = sample(params, groups[g].context, scfg, -1);
      for (const auto& e : teacher_forced_logits(params, groups[g].context, m.tokens)) {
        m.snapshot_logprobs.push_back(e.logprob);
      }
      m.reward.total = rng.uniform01();
      groups[g].members.push_back(std::move(m));
    }
    compute_advantages(groups[g], 1e-8);
  }

  // Perturb the live policy away from the snapshot so the KL term is active.
  for (double& x : params.w) {
    x += rng.normal() * 0.01;
  }

  const GrpoSurrogate s = grpo_surrogate(params, groups, cfg);

  const double h = 1e-4;
  int checked = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const size_t i = static_cast<size_t>(rng.uniform_int(static_cast<int>(params.w.size())));
    const double keep = params.w[i];
    params.w[i] = keep + h;
    const double up = grpo_surrogate(params, groups, cfg).value;
    params.w[i] = keep - h;
    const double dn = grpo_surrogate(params, groups, cfg).value;
    params.w[i] = keep;
    const double fd = (up - dn) / (2 * h);
    worst = std::max(worst, rel_error(s.grad[i], fd));
    ++checked;
  }
  CHECK(checked >= 200);
  CHECK(worst < 1e-4);
}
