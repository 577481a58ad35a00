#pragma once

#include <cstddef>

// Dense kernels used by the policy network. Every kernel exists twice: the
// OpenMP-parallel version in igrl::kernels (the one the model calls) and a
// plain-loop reference in igrl::kernels::serial kept for testing and
// benchmarking. Parallel loops only split across independent output rows and
// each output element is accumulated in the same order as the reference, so
// the two variants produce bitwise-identical results for any thread count.

namespace igrl::kernels {

bool openmp_enabled();
int max_threads();

// y[t] = W x[t], W row-major [rows x cols], x [T x cols], y [T x rows].
void linear_rows(const double* W, int rows, int cols, const double* x, int T, double* y);

// y[t] = W x[t] + b.
void linear_rows_bias(const double* W, const double* b, int rows, int cols, const double* x,
                      int T, double* y);

// dW[o,i] += sum_t dy[t,o] x[t,i];  dx[t,i] = sum_o W[o,i] dy[t,o].
// dx may be null when the input gradient is not needed.
void linear_rows_backward(const double* W, int rows, int cols, const double* x, const double* dy,
                          int T, double* dW, double* dx);

// db[o] += sum_t dy[t,o].
void bias_backward(const double* dy, int T, int rows, double* db);

// Row-wise layer normalization with affine parameters.
// xhat and rstd are cached for the backward pass.
void layernorm_rows(const double* x, int T, int d, const double* gain, const double* bias,
                    double eps, double* y, double* xhat, double* rstd);

// dx[t] from dy[t]; dgain[i] += sum_t dy[t,i] xhat[t,i]; dbias[i] += sum_t dy[t,i].
void layernorm_rows_backward(const double* dy, const double* xhat, const double* rstd,
                             const double* gain, int T, int d, double* dx, double* dgain,
                             double* dbias);

void relu_rows(const double* x, int T, int d, double* y);
void relu_rows_backward(const double* dy, const double* x_pre, int T, int d, double* dx);

// Causal multi-head self-attention over a full sequence.
// q,k,v are [T x (heads*head_dim)]; weights is scratch [heads x T x T]
// (zero-filled above the diagonal); ctx is [T x (heads*head_dim)].
void causal_attention(const double* q, const double* k, const double* v, int T, int heads,
                      int head_dim, double* weights, double* ctx);

void causal_attention_backward(const double* q, const double* k, const double* v,
                               const double* weights, const double* dctx, int T, int heads,
                               int head_dim, double* dq, double* dk, double* dv);

// Attention for a single new position attending to cached keys/values
// [len x (heads*head_dim)], arithmetic identical to the full-sequence kernel.
void causal_attention_step(const double* q_row, const double* k_cache, const double* v_cache,
                           int len, int heads, int head_dim, double* ctx_row);

// logZ[t] = log sum_a exp(logits[t,a]), max-shifted.
void logsumexp_rows(const double* logits, int T, int V, double* logZ);

// x[t] += y[t].
void add_rows(double* x, const double* y, int T, int d);

namespace serial {

void linear_rows(const double* W, int rows, int cols, const double* x, int T, double* y);
void linear_rows_bias(const double* W, const double* b, int rows, int cols, const double* x,
                      int T, double* y);
void linear_rows_backward(const double* W, int rows, int cols, const double* x, const double* dy,
                          int T, double* dW, double* dx);
void bias_backward(const double* dy, int T, int rows, double* db);
void layernorm_rows(const double* x, int T, int d, const double* gain, const double* bias,
                    double eps, double* y, double* xhat, double* rstd);
void layernorm_rows_backward(const double* dy, const double* xhat, const double* rstd,
                             const double* gain, int T, int d, double* dx, double* dgain,
                             double* dbias);
void relu_rows(const double* x, int T, int d, double* y);
void relu_rows_backward(const double* dy, const double* x_pre, int T, int d, double* dx);
void causal_attention(const double* q, const double* k, const double* v, int T, int heads,
                      int head_dim, double* weights, double* ctx);
void causal_attention_backward(const double* q, const double* k, const double* v,
                               const double* weights, const double* dctx, int T, int heads,
                               int head_dim, double* dq, double* dk, double* dv);
void logsumexp_rows(const double* logits, int T, int V, double* logZ);
void add_rows(double* x, const double* y, int T, int d);

}  // namespace serial

}  // namespace igrl::kernels
