#include "igrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "igrl/kernels.hpp"
#include "igrl/rng.hpp"

namespace igrl {

namespace {

constexpr double kLnEps = 1e-5;
constexpr char kMagic[8] = {'I', 'G', 'R', 'L', 'C', 'K', 'P', 'T'};
constexpr uint32_t kCheckpointVersion = 1;

void check_context(const PolicyParams& params, std::span<const int> ctx) {
  if (ctx.empty()) {
    throw std::invalid_argument("context must be non-empty");
  }
  if (static_cast<int>(ctx.size()) > params.cfg.max_seq) {
    throw std::length_error("context length " + std::to_string(ctx.size()) +
                            " exceeds max_seq " + std::to_string(params.cfg.max_seq));
  }
  for (int id : ctx) {
    if (id < 0 || id >= params.cfg.vocab_size) {
      throw std::invalid_argument("token id out of vocabulary range: " + std::to_string(id));
    }
  }
}

void embed(const PolicyParams& p, std::span<const int> ids, int pos0, double* x0) {
  const int d = p.cfg.d_model;
  const double* tok = p.at(p.layout.tok_emb);
  const double* pos = p.at(p.layout.pos_emb);
  for (size_t t = 0; t < ids.size(); ++t) {
    const double* te = tok + static_cast<size_t>(ids[t]) * d;
    const double* pe = pos + static_cast<size_t>(pos0 + t) * d;
    double* row = x0 + t * d;
    for (int i = 0; i < d; ++i) {
      row[i] = te[i] + pe[i];
    }
  }
}

}  // namespace

void PolicyConfig::validate() const {
  if (vocab_size <= 0) throw std::invalid_argument("vocab_size must be positive");
  if (d_model <= 0) throw std::invalid_argument("d_model must be positive");
  if (n_heads <= 0 || d_model % n_heads != 0) {
    throw std::invalid_argument("n_heads must divide d_model");
  }
  if (n_layers < 0) throw std::invalid_argument("n_layers must be non-negative");
  if (max_seq <= 0) throw std::invalid_argument("max_seq must be positive");
  if (!(init_std > 0.0)) throw std::invalid_argument("init_std must be positive");
}

ParamLayout ParamLayout::make(const PolicyConfig& cfg) {
  ParamLayout lo;
  size_t cur = 0;
  auto take = [&cur](size_t n) {
    const size_t at = cur;
    cur += n;
    return at;
  };
  const size_t d = cfg.d_model;
  const size_t ff = cfg.d_ff();
  lo.tok_emb = take(static_cast<size_t>(cfg.vocab_size) * d);
  lo.pos_emb = take(static_cast<size_t>(cfg.max_seq) * d);
  lo.layers.resize(cfg.n_layers);
  for (auto& l : lo.layers) {
    l.ln1_g = take(d);
    l.ln1_b = take(d);
    l.wq = take(d * d);
    l.wk = take(d * d);
    l.wv = take(d * d);
    l.wo = take(d * d);
    l.ln2_g = take(d);
    l.ln2_b = take(d);
    l.w1 = take(ff * d);
    l.w2 = take(d * ff);
  }
  lo.lnf_g = take(d);
  lo.lnf_b = take(d);
  lo.head_w = take(static_cast<size_t>(cfg.vocab_size) * d);
  lo.head_b = take(cfg.vocab_size);
  lo.total = cur;
  return lo;
}

PolicyParams PolicyParams::zeros(const PolicyConfig& cfg) {
  cfg.validate();
  PolicyParams p;
  p.cfg = cfg;
  p.layout = ParamLayout::make(cfg);
  p.w.assign(p.layout.total, 0.0);
  // Layer-norm gains default to identity.
  for (const auto& l : p.layout.layers) {
    std::fill_n(p.at(l.ln1_g), cfg.d_model, 1.0);
    std::fill_n(p.at(l.ln2_g), cfg.d_model, 1.0);
  }
  std::fill_n(p.at(p.layout.lnf_g), cfg.d_model, 1.0);
  return p;
}

PolicyParams PolicyParams::init(const PolicyConfig& cfg, uint64_t seed) {
  PolicyParams p = zeros(cfg);
  Rng rng(Rng::mix(seed, 0x706f6c6963ull));
  auto fill = [&](size_t off, size_t n) {
    double* dst = p.at(off);
    for (size_t i = 0; i < n; ++i) {
      dst[i] = rng.normal() * cfg.init_std;
    }
  };
  const size_t d = cfg.d_model;
  const size_t ff = cfg.d_ff();
  fill(p.layout.tok_emb, static_cast<size_t>(cfg.vocab_size) * d);
  fill(p.layout.pos_emb, static_cast<size_t>(cfg.max_seq) * d);
  for (const auto& l : p.layout.layers) {
    fill(l.wq, d * d);
    fill(l.wk, d * d);
    fill(l.wv, d * d);
    fill(l.wo, d * d);
    fill(l.w1, ff * d);
    fill(l.w2, d * ff);
  }
  fill(p.layout.head_w, static_cast<size_t>(cfg.vocab_size) * d);
  // head bias stays zero
  return p;
}

bool PolicyParams::all_finite() const {
  for (double x : w) {
    if (!std::isfinite(x)) {
      return false;
    }
  }
  return true;
}

ForwardCache forward_cached(const PolicyParams& p, std::span<const int> ctx) {
  check_context(p, ctx);
  namespace K = kernels;
  const int T = static_cast<int>(ctx.size());
  const int d = p.cfg.d_model;
  const int ff = p.cfg.d_ff();
  const int V = p.cfg.vocab_size;
  const int H = p.cfg.n_heads;
  const int hd = p.cfg.head_dim();

  ForwardCache c;
  c.T = T;
  c.ids.assign(ctx.begin(), ctx.end());
  c.x0.resize(static_cast<size_t>(T) * d);
  embed(p, ctx, 0, c.x0.data());

  std::vector<double> x = c.x0;
  c.layers.resize(p.cfg.n_layers);
  for (int li = 0; li < p.cfg.n_layers; ++li) {
    auto& L = c.layers[li];
    const auto& lo = p.layout.layers[li];
    L.x_in = x;
    L.ln1_xhat.resize(x.size());
    L.ln1_rstd.resize(T);
    L.ln1_out.resize(x.size());
    K::layernorm_rows(L.x_in.data(), T, d, p.at(lo.ln1_g), p.at(lo.ln1_b), kLnEps,
                      L.ln1_out.data(), L.ln1_xhat.data(), L.ln1_rstd.data());

    L.q.resize(x.size());
    L.k.resize(x.size());
    L.v.resize(x.size());
    K::linear_rows(p.at(lo.wq), d, d, L.ln1_out.data(), T, L.q.data());
    K::linear_rows(p.at(lo.wk), d, d, L.ln1_out.data(), T, L.k.data());
    K::linear_rows(p.at(lo.wv), d, d, L.ln1_out.data(), T, L.v.data());

    L.att_weights.assign(static_cast<size_t>(H) * T * T, 0.0);
    L.att_ctx.resize(x.size());
    K::causal_attention(L.q.data(), L.k.data(), L.v.data(), T, H, hd, L.att_weights.data(),
                        L.att_ctx.data());

    std::vector<double> att_proj(x.size());
    K::linear_rows(p.at(lo.wo), d, d, L.att_ctx.data(), T, att_proj.data());
    L.x_mid = L.x_in;
    K::add_rows(L.x_mid.data(), att_proj.data(), T, d);

    L.ln2_xhat.resize(x.size());
    L.ln2_rstd.resize(T);
    L.ln2_out.resize(x.size());
    K::layernorm_rows(L.x_mid.data(), T, d, p.at(lo.ln2_g), p.at(lo.ln2_b), kLnEps,
                      L.ln2_out.data(), L.ln2_xhat.data(), L.ln2_rstd.data());

    L.mlp_pre.resize(static_cast<size_t>(T) * ff);
    L.mlp_act.resize(L.mlp_pre.size());
    K::linear_rows(p.at(lo.w1), ff, d, L.ln2_out.data(), T, L.mlp_pre.data());
    K::relu_rows(L.mlp_pre.data(), T, ff, L.mlp_act.data());

    std::vector<double> mlp_out(x.size());
    K::linear_rows(p.at(lo.w2), d, ff, L.mlp_act.data(), T, mlp_out.data());
    x = L.x_mid;
    K::add_rows(x.data(), mlp_out.data(), T, d);
  }

  c.lnf_xhat.resize(x.size());
  c.lnf_rstd.resize(T);
  c.final_norm.resize(x.size());
  K::layernorm_rows(x.data(), T, d, p.at(p.layout.lnf_g), p.at(p.layout.lnf_b), kLnEps,
                    c.final_norm.data(), c.lnf_xhat.data(), c.lnf_rstd.data());

  c.out.T = T;
  c.out.V = V;
  c.out.logits.resize(static_cast<size_t>(T) * V);
  K::linear_rows_bias(p.at(p.layout.head_w), p.at(p.layout.head_b), V, d, c.final_norm.data(), T,
                      c.out.logits.data());
  c.out.logZ.resize(T);
  K::logsumexp_rows(c.out.logits.data(), T, V, c.out.logZ.data());
  c.out.logprobs.resize(c.out.logits.size());
  for (int t = 0; t < T; ++t) {
    const double z = c.out.logZ[t];
    const double* lr = c.out.logits.data() + static_cast<size_t>(t) * V;
    double* pr = c.out.logprobs.data() + static_cast<size_t>(t) * V;
    for (int a = 0; a < V; ++a) {
      pr[a] = lr[a] - z;
    }
  }
  return c;
}

PolicyOutput forward(const PolicyParams& params, std::span<const int> context) {
  return forward_cached(params, context).out;
}

void backward(const PolicyParams& p, const ForwardCache& c, const double* dlogits,
              GradBuffer& grad) {
  namespace K = kernels;
  if (grad.size() != p.w.size()) {
    throw std::invalid_argument("gradient buffer shape mismatch");
  }
  const int T = c.T;
  const int d = p.cfg.d_model;
  const int ff = p.cfg.d_ff();
  const int V = p.cfg.vocab_size;
  const int H = p.cfg.n_heads;
  const int hd = p.cfg.head_dim();
  const size_t td = static_cast<size_t>(T) * d;

  // Output head.
  std::vector<double> dfinal(td);
  K::linear_rows_backward(p.at(p.layout.head_w), V, d, c.final_norm.data(), dlogits, T,
                          grad.data() + p.layout.head_w, dfinal.data());
  K::bias_backward(dlogits, T, V, grad.data() + p.layout.head_b);

  // Final layer norm.
  std::vector<double> dx(td);
  K::layernorm_rows_backward(dfinal.data(), c.lnf_xhat.data(), c.lnf_rstd.data(),
                             p.at(p.layout.lnf_g), T, d, dx.data(), grad.data() + p.layout.lnf_g,
                             grad.data() + p.layout.lnf_b);

  std::vector<double> tmp(td), dctx(td), dq(td), dk(td), dv(td), dh1(td);
  std::vector<double> dpre(static_cast<size_t>(T) * ff), dact(dpre.size());

  for (int li = p.cfg.n_layers - 1; li >= 0; --li) {
    const auto& L = c.layers[li];
    const auto& lo = p.layout.layers[li];

    // MLP block: x_out = x_mid + W2 relu(W1 ln2(x_mid)).
    K::linear_rows_backward(p.at(lo.w2), d, ff, L.mlp_act.data(), dx.data(), T,
                            grad.data() + lo.w2, dact.data());
    K::relu_rows_backward(dact.data(), L.mlp_pre.data(), T, ff, dpre.data());
    K::linear_rows_backward(p.at(lo.w1), ff, d, L.ln2_out.data(), dpre.data(), T,
                            grad.data() + lo.w1, tmp.data());
    std::vector<double> dx_mid(td);
    K::layernorm_rows_backward(tmp.data(), L.ln2_xhat.data(), L.ln2_rstd.data(), p.at(lo.ln2_g),
                               T, d, dx_mid.data(), grad.data() + lo.ln2_g,
                               grad.data() + lo.ln2_b);
    K::add_rows(dx_mid.data(), dx.data(), T, d);  // residual branch

    // Attention block: x_mid = x_in + Wo attn(ln1(x_in)).
    K::linear_rows_backward(p.at(lo.wo), d, d, L.att_ctx.data(), dx_mid.data(), T,
                            grad.data() + lo.wo, dctx.data());
    std::fill(dq.begin(), dq.end(), 0.0);
    std::fill(dk.begin(), dk.end(), 0.0);
    std::fill(dv.begin(), dv.end(), 0.0);
    K::causal_attention_backward(L.q.data(), L.k.data(), L.v.data(), L.att_weights.data(),
                                 dctx.data(), T, H, hd, dq.data(), dk.data(), dv.data());
    K::linear_rows_backward(p.at(lo.wq), d, d, L.ln1_out.data(), dq.data(), T,
                            grad.data() + lo.wq, dh1.data());
    K::linear_rows_backward(p.at(lo.wk), d, d, L.ln1_out.data(), dk.data(), T,
                            grad.data() + lo.wk, tmp.data());
    K::add_rows(dh1.data(), tmp.data(), T, d);
    K::linear_rows_backward(p.at(lo.wv), d, d, L.ln1_out.data(), dv.data(), T,
                            grad.data() + lo.wv, tmp.data());
    K::add_rows(dh1.data(), tmp.data(), T, d);
    K::layernorm_rows_backward(dh1.data(), L.ln1_xhat.data(), L.ln1_rstd.data(), p.at(lo.ln1_g),
                               T, d, dx.data(), grad.data() + lo.ln1_g, grad.data() + lo.ln1_b);
    K::add_rows(dx.data(), dx_mid.data(), T, d);  // residual branch
  }

  // Embeddings. Token rows can collide, so the token loop stays serial per
  // column; position rows are disjoint.
  double* dtok = grad.data() + p.layout.tok_emb;
  double* dpos = grad.data() + p.layout.pos_emb;
  for (int t = 0; t < T; ++t) {
    const double* row = dx.data() + static_cast<size_t>(t) * d;
    double* trow = dtok + static_cast<size_t>(c.ids[t]) * d;
    double* prow = dpos + static_cast<size_t>(t) * d;
    for (int i = 0; i < d; ++i) {
      trow[i] += row[i];
      prow[i] += row[i];
    }
  }
}

void SamplerConfig::validate() const {
  if (temperature < 0.0) throw std::invalid_argument("temperature must be >= 0");
  if (!(top_p > 0.0) || top_p > 1.0) throw std::invalid_argument("top_p must be in (0, 1]");
  if (max_new_tokens <= 0) throw std::invalid_argument("max_new_tokens must be positive");
}

namespace {

// Incremental decode state: per-layer key/value rows for positions seen so far.
struct DecodeState {
  int len = 0;
  std::vector<std::vector<double>> k, v;  // per layer, max_seq x d
};

// Runs one token through the model, appending to the caches and writing the
// next-token logits. Arithmetic is identical to the full-sequence forward.
void decode_step(const PolicyParams& p, DecodeState& st, int token, std::vector<double>& logits) {
  namespace K = kernels;
  const int d = p.cfg.d_model;
  const int ff = p.cfg.d_ff();
  const int V = p.cfg.vocab_size;
  const int H = p.cfg.n_heads;
  const int hd = p.cfg.head_dim();
  const int pos = st.len;
  if (pos >= p.cfg.max_seq) {
    throw std::length_error("decode position exceeds max_seq");
  }

  std::vector<double> x(d);
  const int ids[1] = {token};
  embed(p, std::span<const int>(ids, 1), pos, x.data());

  std::vector<double> xhat(d), h(d), q(d), kk(d), vv(d), ctx(d), proj(d);
  std::vector<double> pre(ff), act(ff);
  double rstd = 0.0;
  for (int li = 0; li < p.cfg.n_layers; ++li) {
    const auto& lo = p.layout.layers[li];
    K::layernorm_rows(x.data(), 1, d, p.at(lo.ln1_g), p.at(lo.ln1_b), kLnEps, h.data(),
                      xhat.data(), &rstd);
    K::linear_rows(p.at(lo.wq), d, d, h.data(), 1, q.data());
    K::linear_rows(p.at(lo.wk), d, d, h.data(), 1, kk.data());
    K::linear_rows(p.at(lo.wv), d, d, h.data(), 1, vv.data());
    std::copy(kk.begin(), kk.end(), st.k[li].begin() + static_cast<size_t>(pos) * d);
    std::copy(vv.begin(), vv.end(), st.v[li].begin() + static_cast<size_t>(pos) * d);
    K::causal_attention_step(q.data(), st.k[li].data(), st.v[li].data(), pos + 1, H, hd,
                             ctx.data());
    K::linear_rows(p.at(lo.wo), d, d, ctx.data(), 1, proj.data());
    K::add_rows(x.data(), proj.data(), 1, d);

    K::layernorm_rows(x.data(), 1, d, p.at(lo.ln2_g), p.at(lo.ln2_b), kLnEps, h.data(),
                      xhat.data(), &rstd);
    K::linear_rows(p.at(lo.w1), ff, d, h.data(), 1, pre.data());
    K::relu_rows(pre.data(), 1, ff, act.data());
    K::linear_rows(p.at(lo.w2), d, ff, act.data(), 1, proj.data());
    K::add_rows(x.data(), proj.data(), 1, d);
  }
  K::layernorm_rows(x.data(), 1, d, p.at(p.layout.lnf_g), p.at(p.layout.lnf_b), kLnEps, h.data(),
                    xhat.data(), &rstd);
  logits.resize(V);
  K::linear_rows_bias(p.at(p.layout.head_w), p.at(p.layout.head_b), V, d, h.data(), 1,
                      logits.data());
  st.len = pos + 1;
}

int pick_token(const std::vector<double>& logits, const SamplerConfig& cfg, Rng& rng) {
  const int V = static_cast<int>(logits.size());
  if (cfg.temperature == 0.0) {
    // Greedy sentinel: lowest index wins ties.
    int best = 0;
    for (int a = 1; a < V; ++a) {
      if (logits[a] > logits[best]) {
        best = a;
      }
    }
    return best;
  }

  std::vector<std::pair<double, int>> scored(V);
  double max_logit = -1e300;
  for (int a = 0; a < V; ++a) {
    scored[a] = {logits[a] / cfg.temperature, a};
    max_logit = std::max(max_logit, scored[a].first);
  }
  double denom = 0.0;
  for (auto& [s, a] : scored) {
    s = std::exp(s - max_logit);
    denom += s;
  }
  for (auto& [s, a] : scored) {
    s /= denom;
  }
  std::sort(scored.begin(), scored.end(), [](const auto& l, const auto& r) {
    return l.first != r.first ? l.first > r.first : l.second < r.second;
  });

  // Smallest prefix whose mass reaches top_p.
  double mass = 0.0;
  size_t cut = 0;
  while (cut < scored.size() && mass < cfg.top_p) {
    mass += scored[cut].first;
    ++cut;
  }

  const double u = rng.uniform01() * mass;
  double cdf = 0.0;
  for (size_t i = 0; i < cut; ++i) {
    cdf += scored[i].first;
    if (u < cdf) {
      return scored[i].second;
    }
  }
  return scored[cut - 1].second;
}

}  // namespace

std::vector<int> sample(const PolicyParams& params, std::span<const int> context,
                        const SamplerConfig& cfg, int eos_id) {
  cfg.validate();
  check_context(params, context);
  Rng rng(cfg.seed);

  DecodeState st;
  st.k.assign(params.cfg.n_layers,
              std::vector<double>(static_cast<size_t>(params.cfg.max_seq) * params.cfg.d_model));
  st.v = st.k;

  std::vector<double> logits;
  for (int id : context) {
    decode_step(params, st, id, logits);
  }

  const int budget =
      std::min(cfg.max_new_tokens, params.cfg.max_seq - static_cast<int>(context.size()));
  if (budget <= 0) {
    throw std::length_error("context leaves no room to sample within max_seq");
  }
  std::vector<int> out;
  for (int n = 0; n < budget; ++n) {
    const int tok = pick_token(logits, cfg, rng);
    out.push_back(tok);
    if (tok == eos_id) {
      break;
    }
    if (n + 1 < budget) {
      decode_step(params, st, tok, logits);
    }
  }
  return out;
}

std::vector<TeacherForcedEntry> teacher_forced_logits(const PolicyParams& params,
                                                      std::span<const int> context,
                                                      std::span<const int> continuation) {
  if (continuation.empty()) {
    throw std::invalid_argument("continuation must be non-empty");
  }
  if (static_cast<int>(context.size() + continuation.size()) > params.cfg.max_seq) {
    throw std::length_error("context plus continuation exceeds max_seq");
  }
  // The last continuation token is never fed, only predicted.
  std::vector<int> fed(context.begin(), context.end());
  fed.insert(fed.end(), continuation.begin(), continuation.end() - 1);
  const PolicyOutput out = forward(params, fed);

  std::vector<TeacherForcedEntry> entries(continuation.size());
  const size_t base = context.size() - 1;
  for (size_t k = 0; k < continuation.size(); ++k) {
    const int pos = static_cast<int>(base + k);
    const int tok = continuation[k];
    if (tok < 0 || tok >= out.V) {
      throw std::invalid_argument("continuation token out of vocabulary range");
    }
    entries[k].logit = out.logits[static_cast<size_t>(pos) * out.V + tok];
    entries[k].logZ = out.logZ[pos];
    entries[k].logprob = out.logprobs[static_cast<size_t>(pos) * out.V + tok];
  }
  return entries;
}

double weighted_logprob_grad(const PolicyParams& params, std::span<const int> context,
                             std::span<const int> continuation, std::span<const double> weights,
                             GradBuffer& grad) {
  if (continuation.empty()) {
    throw std::invalid_argument("continuation must be non-empty");
  }
  if (!weights.empty() && weights.size() != continuation.size()) {
    throw std::invalid_argument("weights length mismatch");
  }
  if (static_cast<int>(context.size() + continuation.size()) > params.cfg.max_seq) {
    throw std::length_error("context plus continuation exceeds max_seq");
  }
  std::vector<int> fed(context.begin(), context.end());
  fed.insert(fed.end(), continuation.begin(), continuation.end() - 1);
  const ForwardCache cache = forward_cached(params, fed);
  const int V = cache.out.V;

  std::vector<double> dlogits(static_cast<size_t>(cache.T) * V, 0.0);
  const size_t base = context.size() - 1;
  double value = 0.0;
  for (size_t k = 0; k < continuation.size(); ++k) {
    const double wk = weights.empty() ? 1.0 : weights[k];
    const size_t pos = base + k;
    const int tok = continuation[k];
    value += wk * cache.out.logprobs[pos * V + tok];
    if (wk == 0.0) {
      continue;
    }
    const double* lp = cache.out.logprobs.data() + pos * V;
    double* dl = dlogits.data() + pos * V;
    for (int a = 0; a < V; ++a) {
      dl[a] -= wk * std::exp(lp[a]);
    }
    dl[tok] += wk;
  }
  backward(params, cache, dlogits.data(), grad);
  return value;
}

GradBuffer grad_logprob(const PolicyParams& params, std::span<const int> context,
                        std::span<const int> continuation) {
  GradBuffer grad = params.zero_grad();
  weighted_logprob_grad(params, context, continuation, {}, grad);
  return grad;
}

void sgd_step(PolicyParams& params, const GradBuffer& grad, double lr) {
  if (grad.size() != params.w.size()) {
    throw std::invalid_argument("gradient buffer shape mismatch");
  }
  for (size_t i = 0; i < params.w.size(); ++i) {
    params.w[i] -= lr * grad[i];
  }
  if (!params.all_finite()) {
    throw std::runtime_error("non-finite parameter after update");
  }
}

double clip_grad_norm(GradBuffer& grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) {
    sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) {
    throw std::runtime_error("non-finite gradient norm");
  }
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (double& g : grad) {
      g *= scale;
    }
  }
  return norm;
}

namespace {

template <class T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
void read_pod(std::istream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
}

}  // namespace

void save_checkpoint(const std::string& path, const PolicyParams& params,
                     const CheckpointMeta& meta) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open checkpoint for writing: " + path);
  }
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kCheckpointVersion);
  write_pod(out, meta.seed);
  write_pod(out, meta.config_hash);
  write_pod(out, static_cast<int32_t>(params.cfg.vocab_size));
  write_pod(out, static_cast<int32_t>(params.cfg.d_model));
  write_pod(out, static_cast<int32_t>(params.cfg.n_layers));
  write_pod(out, static_cast<int32_t>(params.cfg.n_heads));
  write_pod(out, static_cast<int32_t>(params.cfg.max_seq));
  write_pod(out, params.cfg.init_std);
  write_pod(out, static_cast<uint64_t>(params.w.size()));
  out.write(reinterpret_cast<const char*>(params.w.data()),
            static_cast<std::streamsize>(params.w.size() * sizeof(double)));
  if (!out) {
    throw std::runtime_error("failed writing checkpoint: " + path);
  }
}

PolicyParams load_checkpoint(const std::string& path, CheckpointMeta* meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open checkpoint: " + path);
  }
  char magic[8] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path);
  }
  uint32_t version = 0;
  read_pod(in, version);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  CheckpointMeta m;
  m.format_version = version;
  read_pod(in, m.seed);
  read_pod(in, m.config_hash);
  int32_t vocab = 0, d = 0, layers = 0, heads = 0, max_seq = 0;
  double init_std = 0.0;
  read_pod(in, vocab);
  read_pod(in, d);
  read_pod(in, layers);
  read_pod(in, heads);
  read_pod(in, max_seq);
  read_pod(in, init_std);
  uint64_t count = 0;
  read_pod(in, count);

  PolicyConfig cfg;
  cfg.vocab_size = vocab;
  cfg.d_model = d;
  cfg.n_layers = layers;
  cfg.n_heads = heads;
  cfg.max_seq = max_seq;
  cfg.init_std = init_std;
  PolicyParams params = PolicyParams::zeros(cfg);
  if (count != params.w.size()) {
    throw std::runtime_error("checkpoint parameter count mismatch in " + path);
  }
  in.read(reinterpret_cast<char*>(params.w.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) {
    throw std::runtime_error("truncated checkpoint: " + path);
  }
  if (meta != nullptr) {
    *meta = m;
  }
  return params;
}

PolicyParams load_checkpoint_expecting(const std::string& path, const PolicyConfig& expected,
                                       CheckpointMeta* meta) {
  PolicyParams params = load_checkpoint(path, meta);
  if (!(params.cfg == expected)) {
    throw std::runtime_error("checkpoint config mismatch: " + path);
  }
  return params;
}

}  // namespace igrl
