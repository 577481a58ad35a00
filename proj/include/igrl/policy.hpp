#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace igrl {

// Decoder-only transformer: token + position embeddings, pre-norm blocks
// (causal multi-head attention, then a relu MLP), a final layer norm and a
// linear output head with bias. All weights are doubles in one flat buffer so
// that optimizer steps, gradient clipping, finite-difference checks and
// checkpoint IO treat every tensor uniformly.
struct PolicyConfig {
  int vocab_size = 0;
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int max_seq = 256;
  double init_std = 0.05;

  int head_dim() const { return d_model / n_heads; }
  int d_ff() const { return 4 * d_model; }
  void validate() const;
  bool operator==(const PolicyConfig&) const = default;
};

// Flat-buffer offsets for every tensor, in checkpoint order.
struct ParamLayout {
  struct Layer {
    size_t ln1_g, ln1_b, wq, wk, wv, wo, ln2_g, ln2_b, w1, w2;
  };
  size_t tok_emb = 0, pos_emb = 0;
  std::vector<Layer> layers;
  size_t lnf_g = 0, lnf_b = 0, head_w = 0, head_b = 0;
  size_t total = 0;

  static ParamLayout make(const PolicyConfig& cfg);
};

using GradBuffer = std::vector<double>;

struct PolicyParams {
  PolicyConfig cfg;
  ParamLayout layout;
  std::vector<double> w;

  static PolicyParams init(const PolicyConfig& cfg, uint64_t seed);
  static PolicyParams zeros(const PolicyConfig& cfg);

  double* at(size_t offset) { return w.data() + offset; }
  const double* at(size_t offset) const { return w.data() + offset; }
  bool all_finite() const;
  GradBuffer zero_grad() const { return GradBuffer(w.size(), 0.0); }
};

// Per-position raw logits, normalized log-probabilities and the log partition
// value, with logprobs[t][a] == logits[t][a] - logZ[t].
struct PolicyOutput {
  int T = 0;
  int V = 0;
  std::vector<double> logits;    // T x V
  std::vector<double> logprobs;  // T x V
  std::vector<double> logZ;      // T

  std::span<const double> logits_row(int t) const {
    return {logits.data() + static_cast<size_t>(t) * V, static_cast<size_t>(V)};
  }
  std::span<const double> logprobs_row(int t) const {
    return {logprobs.data() + static_cast<size_t>(t) * V, static_cast<size_t>(V)};
  }
};

// Activations cached by a teacher-forced forward pass, consumed by backward().
struct ForwardCache {
  struct LayerCache {
    std::vector<double> x_in, ln1_xhat, ln1_rstd, ln1_out;
    std::vector<double> q, k, v, att_weights, att_ctx;
    std::vector<double> x_mid, ln2_xhat, ln2_rstd, ln2_out;
    std::vector<double> mlp_pre, mlp_act;
  };
  int T = 0;
  std::vector<int> ids;
  std::vector<double> x0;
  std::vector<LayerCache> layers;
  std::vector<double> lnf_xhat, lnf_rstd, final_norm;
  PolicyOutput out;
};

PolicyOutput forward(const PolicyParams& params, std::span<const int> context);
ForwardCache forward_cached(const PolicyParams& params, std::span<const int> context);

// Accumulates d(objective)/d(params) into grad for the given upstream
// d(objective)/d(logits), laid out T x V.
void backward(const PolicyParams& params, const ForwardCache& cache, const double* dlogits,
              GradBuffer& grad);

struct SamplerConfig {
  double temperature = 0.9;  // 0 is the greedy sentinel
  double top_p = 0.9;
  int max_new_tokens = 64;
  uint64_t seed = 0;

  void validate() const;
};

// Nucleus sampling from the policy; returns the continuation (the end token,
// when emitted, is included). Incremental decoding with per-layer key/value
// buffers; per-position arithmetic matches the full forward pass exactly.
std::vector<int> sample(const PolicyParams& params, std::span<const int> context,
                        const SamplerConfig& cfg, int eos_id);

struct TeacherForcedEntry {
  double logit = 0;    // raw logit of the realized token
  double logZ = 0;     // log partition at that position
  double logprob = 0;  // logit - logZ
};

// Per-token scores of a fixed continuation under teacher forcing. Entry k is
// read from the position that predicts continuation[k].
std::vector<TeacherForcedEntry> teacher_forced_logits(const PolicyParams& params,
                                                      std::span<const int> context,
                                                      std::span<const int> continuation);

// Gradient of sum_k w_k * logprob(continuation[k]) accumulated into grad;
// returns the weighted logprob sum. weights may be empty (all ones).
double weighted_logprob_grad(const PolicyParams& params, std::span<const int> context,
                             std::span<const int> continuation, std::span<const double> weights,
                             GradBuffer& grad);

// Gradient of sum_k logprob(continuation[k]).
GradBuffer grad_logprob(const PolicyParams& params, std::span<const int> context,
                        std::span<const int> continuation);

// In-place descent step: w -= lr * grad. Throws on non-finite result.
void sgd_step(PolicyParams& params, const GradBuffer& grad, double lr);

// Scales grad so its L2 norm is at most max_norm; returns the pre-clip norm.
double clip_grad_norm(GradBuffer& grad, double max_norm);

// Checkpoint container: magic, format version, seed, config hash, the model
// config and the flat weight buffer in layout order, little-endian doubles.
struct CheckpointMeta {
  uint32_t format_version = 0;
  uint64_t seed = 0;
  uint64_t config_hash = 0;
};

void save_checkpoint(const std::string& path, const PolicyParams& params,
                     const CheckpointMeta& meta);
PolicyParams load_checkpoint(const std::string& path, CheckpointMeta* meta = nullptr);

// Loads and validates that the stored config matches; throws on mismatch.
PolicyParams load_checkpoint_expecting(const std::string& path, const PolicyConfig& expected,
                                       CheckpointMeta* meta = nullptr);

}  // namespace igrl
