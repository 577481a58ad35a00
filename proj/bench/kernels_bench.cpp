// Times the OpenMP kernels against the serial reference, then a whole
// forward/backward pass at 1 thread vs all threads. Build and run:
//   cmake --build build --target kernels_bench && ./build/bench/kernels_bench

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "igrl/kernels.hpp"
#include "igrl/policy.hpp"
#include "igrl/rng.hpp"

using namespace igrl;
namespace K = kernels;

namespace {

using Clock = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) {
    fn();
  }
  const auto t1 = Clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const std::string& name, double serial_ms, double parallel_ms) {
  std::printf("%-32s %10.3f ms %10.3f ms %8.2fx\n", name.c_str(), serial_ms, parallel_ms,
              serial_ms / parallel_ms);
}

std::vector<double> random_vec(size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) {
    x = rng.normal();
  }
  return v;
}

}  // namespace

int main() {
  std::printf("openmp: %s, max threads: %d\n\n", K::openmp_enabled() ? "on" : "off",
              K::max_threads());
  std::printf("%-32s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

  Rng rng(1);
  const int T = 256, d = 64, V = 128, heads = 4, hd = d / heads, ff = 4 * d;
  const int reps = 50;

  {
    const auto W = random_vec(static_cast<size_t>(V) * d, rng);
    const auto x = random_vec(static_cast<size_t>(T) * d, rng);
    std::vector<double> y(static_cast<size_t>(T) * V);
    report("linear 256x64 -> 128",
           time_ms([&] { K::serial::linear_rows(W.data(), V, d, x.data(), T, y.data()); }, reps),
           time_ms([&] { K::linear_rows(W.data(), V, d, x.data(), T, y.data()); }, reps));
  }
  {
    const auto W = random_vec(static_cast<size_t>(ff) * d, rng);
    const auto x = random_vec(static_cast<size_t>(T) * d, rng);
    const auto dy = random_vec(static_cast<size_t>(T) * ff, rng);
    std::vector<double> dW(W.size(), 0.0), dx(x.size());
    report("linear backward 256x64 -> 256",
           time_ms([&] {
             K::serial::linear_rows_backward(W.data(), ff, d, x.data(), dy.data(), T, dW.data(),
                                             dx.data());
           }, reps),
           time_ms([&] {
             K::linear_rows_backward(W.data(), ff, d, x.data(), dy.data(), T, dW.data(),
                                     dx.data());
           }, reps));
  }
  {
    const auto q = random_vec(static_cast<size_t>(T) * d, rng);
    const auto k = random_vec(static_cast<size_t>(T) * d, rng);
    const auto v = random_vec(static_cast<size_t>(T) * d, rng);
    std::vector<double> w(static_cast<size_t>(heads) * T * T, 0.0), ctx(q.size());
    report("attention fwd T=256 h=4",
           time_ms([&] {
             K::serial::causal_attention(q.data(), k.data(), v.data(), T, heads, hd, w.data(),
                                         ctx.data());
           }, reps),
           time_ms([&] {
             K::causal_attention(q.data(), k.data(), v.data(), T, heads, hd, w.data(),
                                 ctx.data());
           }, reps));

    const auto dctx = random_vec(q.size(), rng);
    std::vector<double> dq(q.size(), 0.0), dk(q.size(), 0.0), dv(q.size(), 0.0);
    report("attention bwd T=256 h=4",
           time_ms([&] {
             K::serial::causal_attention_backward(q.data(), k.data(), v.data(), w.data(),
                                                  dctx.data(), T, heads, hd, dq.data(),
                                                  dk.data(), dv.data());
           }, reps),
           time_ms([&] {
             K::causal_attention_backward(q.data(), k.data(), v.data(), w.data(), dctx.data(), T,
                                          heads, hd, dq.data(), dk.data(), dv.data());
           }, reps));
  }
  {
    const auto logits = random_vec(static_cast<size_t>(T) * V, rng);
    std::vector<double> z(T);
    report("logsumexp T=256 V=128",
           time_ms([&] { K::serial::logsumexp_rows(logits.data(), T, V, z.data()); }, reps),
           time_ms([&] { K::logsumexp_rows(logits.data(), T, V, z.data()); }, reps));
  }

#ifdef _OPENMP
  {
    PolicyConfig cfg;
    cfg.vocab_size = V;
    cfg.d_model = d;
    cfg.n_layers = 2;
    cfg.n_heads = heads;
    cfg.max_seq = T;
    const PolicyParams params = PolicyParams::init(cfg, 7);
    std::vector<int> ctx(static_cast<size_t>(T) - 8);
    Rng crng(2);
    for (int& id : ctx) {
      id = crng.uniform_int(V);
    }
    std::vector<int> cont(8);
    for (int& id : cont) {
      id = crng.uniform_int(V);
    }

    auto fwd_bwd = [&] {
      GradBuffer grad = params.zero_grad();
      weighted_logprob_grad(params, ctx, cont, {}, grad);
    };
    const int model_reps = 10;
    omp_set_num_threads(1);
    const double one = time_ms(fwd_bwd, model_reps);
    omp_set_num_threads(K::max_threads());
    const double many = time_ms(fwd_bwd, model_reps);
    std::printf("\n");
    report("model fwd+bwd (1 vs all threads)", one, many);
  }
#endif
  return 0;
}
