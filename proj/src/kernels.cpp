#include "igrl/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace igrl::kernels {

namespace {

// Minimum estimated flop count before a loop is worth forking threads for.
constexpr long long kGrain = 262144;

inline bool worth(long long iters, long long per_iter) { return iters * per_iter >= kGrain; }

inline double dot(const double* a, const double* b, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += a[i] * b[i];
  }
  return acc;
}

// One (head, query-position) row of causal attention: softmax weights over
// the prefix and the weighted value sum.
inline void attn_row(const double* q, const double* k, const double* v, int T, int d_total,
                     int head_dim, int h, int t, double inv_sqrt, double* wrow, double* ctx) {
  const int off = h * head_dim;
  const double* qrow = q + static_cast<size_t>(t) * d_total + off;

  double max_score = -1e300;
  for (int s = 0; s <= t; ++s) {
    const double sc = dot(qrow, k + static_cast<size_t>(s) * d_total + off, head_dim) * inv_sqrt;
    wrow[s] = sc;
    max_score = std::max(max_score, sc);
  }
  double denom = 0.0;
  for (int s = 0; s <= t; ++s) {
    wrow[s] = std::exp(wrow[s] - max_score);
    denom += wrow[s];
  }
  const double inv_denom = 1.0 / denom;
  for (int s = 0; s <= t; ++s) {
    wrow[s] *= inv_denom;
  }
  for (int s = t + 1; s < T; ++s) {
    wrow[s] = 0.0;
  }

  double* crow = ctx + static_cast<size_t>(t) * d_total + off;
  for (int j = 0; j < head_dim; ++j) {
    double acc = 0.0;
    for (int s = 0; s <= t; ++s) {
      acc += wrow[s] * v[static_cast<size_t>(s) * d_total + off + j];
    }
    crow[j] = acc;
  }
}

inline void layernorm_row(const double* xr, int d, const double* gain, const double* bias,
                          double eps, double* yr, double* xhr, double* rstd_out) {
  double mean = 0.0;
  for (int i = 0; i < d; ++i) {
    mean += xr[i];
  }
  mean /= d;
  double var = 0.0;
  for (int i = 0; i < d; ++i) {
    const double c = xr[i] - mean;
    var += c * c;
  }
  var /= d;
  const double rstd = 1.0 / std::sqrt(var + eps);
  for (int i = 0; i < d; ++i) {
    xhr[i] = (xr[i] - mean) * rstd;
    yr[i] = gain[i] * xhr[i] + bias[i];
  }
  *rstd_out = rstd;
}

inline void layernorm_row_backward(const double* dyr, const double* xhr, double rstd,
                                   const double* gain, int d, double* dxr) {
  double m1 = 0.0;
  double m2 = 0.0;
  for (int i = 0; i < d; ++i) {
    const double g = dyr[i] * gain[i];
    m1 += g;
    m2 += g * xhr[i];
  }
  m1 /= d;
  m2 /= d;
  for (int i = 0; i < d; ++i) {
    dxr[i] = rstd * (dyr[i] * gain[i] - m1 - xhr[i] * m2);
  }
}

inline double logsumexp_row(const double* row, int V) {
  double m = row[0];
  for (int a = 1; a < V; ++a) {
    m = std::max(m, row[a]);
  }
  double acc = 0.0;
  for (int a = 0; a < V; ++a) {
    acc += std::exp(row[a] - m);
  }
  return m + std::log(acc);
}

}  // namespace

bool openmp_enabled() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// ---------------------------------------------------------------------------
// parallel variants
// ---------------------------------------------------------------------------

void linear_rows(const double* W, int rows, int cols, const double* x, int T, double* y) {
  const long long n = static_cast<long long>(T) * rows;
#pragma omp parallel for schedule(static) if (worth(n, cols))
  for (long long idx = 0; idx < n; ++idx) {
    const int t = static_cast<int>(idx / rows);
    const int o = static_cast<int>(idx % rows);
    y[idx] = dot(W + static_cast<size_t>(o) * cols, x + static_cast<size_t>(t) * cols, cols);
  }
}

void linear_rows_bias(const double* W, const double* b, int rows, int cols, const double* x,
                      int T, double* y) {
  const long long n = static_cast<long long>(T) * rows;
#pragma omp parallel for schedule(static) if (worth(n, cols))
  for (long long idx = 0; idx < n; ++idx) {
    const int t = static_cast<int>(idx / rows);
    const int o = static_cast<int>(idx % rows);
    y[idx] =
        b[o] + dot(W + static_cast<size_t>(o) * cols, x + static_cast<size_t>(t) * cols, cols);
  }
}

void linear_rows_backward(const double* W, int rows, int cols, const double* x, const double* dy,
                          int T, double* dW, double* dx) {
#pragma omp parallel for schedule(static) if (worth(rows, static_cast<long long>(cols) * T))
  for (int o = 0; o < rows; ++o) {
    double* dWrow = dW + static_cast<size_t>(o) * cols;
    for (int t = 0; t < T; ++t) {
      const double g = dy[static_cast<size_t>(t) * rows + o];
      if (g == 0.0) {
        continue;
      }
      const double* xr = x + static_cast<size_t>(t) * cols;
      for (int i = 0; i < cols; ++i) {
        dWrow[i] += g * xr[i];
      }
    }
  }
  if (dx != nullptr) {
    const long long n = static_cast<long long>(T) * cols;
#pragma omp parallel for schedule(static) if (worth(n, rows))
    for (long long idx = 0; idx < n; ++idx) {
      const int t = static_cast<int>(idx / cols);
      const int i = static_cast<int>(idx % cols);
      const double* dyr = dy + static_cast<size_t>(t) * rows;
      double acc = 0.0;
      for (int o = 0; o < rows; ++o) {
        acc += W[static_cast<size_t>(o) * cols + i] * dyr[o];
      }
      dx[idx] = acc;
    }
  }
}

void bias_backward(const double* dy, int T, int rows, double* db) {
#pragma omp parallel for schedule(static) if (worth(rows, T))
  for (int o = 0; o < rows; ++o) {
    double acc = 0.0;
    for (int t = 0; t < T; ++t) {
      acc += dy[static_cast<size_t>(t) * rows + o];
    }
    db[o] += acc;
  }
}

void layernorm_rows(const double* x, int T, int d, const double* gain, const double* bias,
                    double eps, double* y, double* xhat, double* rstd) {
#pragma omp parallel for schedule(static) if (worth(T, 4LL * d))
  for (int t = 0; t < T; ++t) {
    const size_t r = static_cast<size_t>(t) * d;
    layernorm_row(x + r, d, gain, bias, eps, y + r, xhat + r, rstd + t);
  }
}

void layernorm_rows_backward(const double* dy, const double* xhat, const double* rstd,
                             const double* gain, int T, int d, double* dx, double* dgain,
                             double* dbias) {
#pragma omp parallel for schedule(static) if (worth(T, 6LL * d))
  for (int t = 0; t < T; ++t) {
    const size_t r = static_cast<size_t>(t) * d;
    layernorm_row_backward(dy + r, xhat + r, rstd[t], gain, d, dx + r);
  }
#pragma omp parallel for schedule(static) if (worth(d, 2LL * T))
  for (int i = 0; i < d; ++i) {
    double dg = 0.0;
    double db = 0.0;
    for (int t = 0; t < T; ++t) {
      const size_t r = static_cast<size_t>(t) * d + i;
      dg += dy[r] * xhat[r];
      db += dy[r];
    }
    dgain[i] += dg;
    dbias[i] += db;
  }
}

void relu_rows(const double* x, int T, int d, double* y) {
  const long long n = static_cast<long long>(T) * d;
#pragma omp parallel for schedule(static) if (worth(n, 1))
  for (long long i = 0; i < n; ++i) {
    y[i] = x[i] > 0.0 ? x[i] : 0.0;
  }
}

void relu_rows_backward(const double* dy, const double* x_pre, int T, int d, double* dx) {
  const long long n = static_cast<long long>(T) * d;
#pragma omp parallel for schedule(static) if (worth(n, 1))
  for (long long i = 0; i < n; ++i) {
    dx[i] = x_pre[i] > 0.0 ? dy[i] : 0.0;
  }
}

void causal_attention(const double* q, const double* k, const double* v, int T, int heads,
                      int head_dim, double* weights, double* ctx) {
  const int d_total = heads * head_dim;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  const long long n = static_cast<long long>(heads) * T;
#pragma omp parallel for schedule(static) if (worth(n, static_cast<long long>(T) * head_dim))
  for (long long idx = 0; idx < n; ++idx) {
    const int h = static_cast<int>(idx / T);
    const int t = static_cast<int>(idx % T);
    attn_row(q, k, v, T, d_total, head_dim, h, t, inv_sqrt,
             weights + (static_cast<size_t>(h) * T + t) * T, ctx);
  }
}

void causal_attention_backward(const double* q, const double* k, const double* v,
                               const double* weights, const double* dctx, int T, int heads,
                               int head_dim, double* dq, double* dk, double* dv) {
  const int d_total = heads * head_dim;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<double> dscores(static_cast<size_t>(heads) * T * T, 0.0);

  // dscores and dq, parallel over query rows.
  const long long n = static_cast<long long>(heads) * T;
#pragma omp parallel for schedule(static) if (worth(n, static_cast<long long>(T) * head_dim))
  for (long long idx = 0; idx < n; ++idx) {
    const int h = static_cast<int>(idx / T);
    const int t = static_cast<int>(idx % T);
    const int off = h * head_dim;
    const double* wrow = weights + (static_cast<size_t>(h) * T + t) * T;
    double* srow = dscores.data() + (static_cast<size_t>(h) * T + t) * T;
    const double* dcrow = dctx + static_cast<size_t>(t) * d_total + off;

    double wsum = 0.0;
    for (int s = 0; s <= t; ++s) {
      const double dw = dot(dcrow, v + static_cast<size_t>(s) * d_total + off, head_dim);
      srow[s] = dw;
      wsum += wrow[s] * dw;
    }
    for (int s = 0; s <= t; ++s) {
      srow[s] = wrow[s] * (srow[s] - wsum);
    }

    double* dqrow = dq + static_cast<size_t>(t) * d_total + off;
    for (int j = 0; j < head_dim; ++j) {
      double acc = 0.0;
      for (int s = 0; s <= t; ++s) {
        acc += srow[s] * k[static_cast<size_t>(s) * d_total + off + j];
      }
      dqrow[j] += acc * inv_sqrt;
    }
  }

  // dk and dv, parallel over key rows.
#pragma omp parallel for schedule(static) if (worth(n, static_cast<long long>(T) * head_dim))
  for (long long idx = 0; idx < n; ++idx) {
    const int h = static_cast<int>(idx / T);
    const int s = static_cast<int>(idx % T);
    const int off = h * head_dim;
    double* dkrow = dk + static_cast<size_t>(s) * d_total + off;
    double* dvrow = dv + static_cast<size_t>(s) * d_total + off;
    for (int j = 0; j < head_dim; ++j) {
      double acc_k = 0.0;
      double acc_v = 0.0;
      for (int t = s; t < T; ++t) {
        const size_t row = (static_cast<size_t>(h) * T + t) * T + s;
        acc_k += dscores[row] * q[static_cast<size_t>(t) * d_total + off + j];
        acc_v += weights[row] * dctx[static_cast<size_t>(t) * d_total + off + j];
      }
      dkrow[j] += acc_k * inv_sqrt;
      dvrow[j] += acc_v;
    }
  }
}

void causal_attention_step(const double* q_row, const double* k_cache, const double* v_cache,
                           int len, int heads, int head_dim, double* ctx_row) {
  const int d_total = heads * head_dim;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<double> wrow(static_cast<size_t>(len));
  for (int h = 0; h < heads; ++h) {
    const int off = h * head_dim;
    double max_score = -1e300;
    for (int s = 0; s < len; ++s) {
      const double sc =
          dot(q_row + off, k_cache + static_cast<size_t>(s) * d_total + off, head_dim) * inv_sqrt;
      wrow[s] = sc;
      max_score = std::max(max_score, sc);
    }
    double denom = 0.0;
    for (int s = 0; s < len; ++s) {
      wrow[s] = std::exp(wrow[s] - max_score);
      denom += wrow[s];
    }
    const double inv_denom = 1.0 / denom;
    for (int s = 0; s < len; ++s) {
      wrow[s] *= inv_denom;
    }
    for (int j = 0; j < head_dim; ++j) {
      double acc = 0.0;
      for (int s = 0; s < len; ++s) {
        acc += wrow[s] * v_cache[static_cast<size_t>(s) * d_total + off + j];
      }
      ctx_row[off + j] = acc;
    }
  }
}

void logsumexp_rows(const double* logits, int T, int V, double* logZ) {
#pragma omp parallel for schedule(static) if (worth(T, 2LL * V))
  for (int t = 0; t < T; ++t) {
    logZ[t] = logsumexp_row(logits + static_cast<size_t>(t) * V, V);
  }
}

void add_rows(double* x, const double* y, int T, int d) {
  const long long n = static_cast<long long>(T) * d;
#pragma omp parallel for schedule(static) if (worth(n, 1))
  for (long long i = 0; i < n; ++i) {
    x[i] += y[i];
  }
}

// ---------------------------------------------------------------------------
// serial reference
// ---------------------------------------------------------------------------

namespace serial {

void linear_rows(const double* W, int rows, int cols, const double* x, int T, double* y) {
  for (long long idx = 0; idx < static_cast<long long>(T) * rows; ++idx) {
    const int t = static_cast<int>(idx / rows);
    const int o = static_cast<int>(idx % rows);
    y[idx] = dot(W + static_cast<size_t>(o) * cols, x + static_cast<size_t>(t) * cols, cols);
  }
}

void linear_rows_bias(const double* W, const double* b, int rows, int cols, const double* x,
                      int T, double* y) {
  for (long long idx = 0; idx < static_cast<long long>(T) * rows; ++idx) {
    const int t = static_cast<int>(idx / rows);
    const int o = static_cast<int>(idx % rows);
    y[idx] =
        b[o] + dot(W + static_cast<size_t>(o) * cols, x + static_cast<size_t>(t) * cols, cols);
  }
}

void linear_rows_backward(const double* W, int rows, int cols, const double* x, const double* dy,
                          int T, double* dW, double* dx) {
  for (int o = 0; o < rows; ++o) {
    double* dWrow = dW + static_cast<size_t>(o) * cols;
    for (int t = 0; t < T; ++t) {
      const double g = dy[static_cast<size_t>(t) * rows + o];
      if (g == 0.0) {
        continue;
      }
      const double* xr = x + static_cast<size_t>(t) * cols;
      for (int i = 0; i < cols; ++i) {
        dWrow[i] += g * xr[i];
      }
    }
  }
  if (dx != nullptr) {
    for (long long idx = 0; idx < static_cast<long long>(T) * cols; ++idx) {
      const int t = static_cast<int>(idx / cols);
      const int i = static_cast<int>(idx % cols);
      const double* dyr = dy + static_cast<size_t>(t) * rows;
      double acc = 0.0;
      for (int o = 0; o < rows; ++o) {
        acc += W[static_cast<size_t>(o) * cols + i] * dyr[o];
      }
      dx[idx] = acc;
    }
  }
}

void bias_backward(const double* dy, int T, int rows, double* db) {
  for (int o = 0; o < rows; ++o) {
    double acc = 0.0;
    for (int t = 0; t < T; ++t) {
      acc += dy[static_cast<size_t>(t) * rows + o];
    }
    db[o] += acc;
  }
}

void layernorm_rows(const double* x, int T, int d, const double* gain, const double* bias,
                    double eps, double* y, double* xhat, double* rstd) {
  for (int t = 0; t < T; ++t) {
    const size_t r = static_cast<size_t>(t) * d;
    layernorm_row(x + r, d, gain, bias, eps, y + r, xhat + r, rstd + t);
  }
}

void layernorm_rows_backward(const double* dy, const double* xhat, const double* rstd,
                             const double* gain, int T, int d, double* dx, double* dgain,
                             double* dbias) {
  for (int t = 0; t < T; ++t) {
    const size_t r = static_cast<size_t>(t) * d;
    layernorm_row_backward(dy + r, xhat + r, rstd[t], gain, d, dx + r);
  }
  for (int i = 0; i < d; ++i) {
    double dg = 0.0;
    double db = 0.0;
    for (int t = 0; t < T; ++t) {
      const size_t r = static_cast<size_t>(t) * d + i;
      dg += dy[r] * xhat[r];
      db += dy[r];
    }
    dgain[i] += dg;
    dbias[i] += db;
  }
}

void relu_rows(const double* x, int T, int d, double* y) {
  for (long long i = 0; i < static_cast<long long>(T) * d; ++i) {
    y[i] = x[i] > 0.0 ? x[i] : 0.0;
  }
}

void relu_rows_backward(const double* dy, const double* x_pre, int T, int d, double* dx) {
  for (long long i = 0; i < static_cast<long long>(T) * d; ++i) {
    dx[i] = x_pre[i] > 0.0 ? dy[i] : 0.0;
  }
}

void causal_attention(const double* q, const double* k, const double* v, int T, int heads,
                      int head_dim, double* weights, double* ctx) {
  const int d_total = heads * head_dim;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  for (long long idx = 0; idx < static_cast<long long>(heads) * T; ++idx) {
    const int h = static_cast<int>(idx / T);
    const int t = static_cast<int>(idx % T);
    attn_row(q, k, v, T, d_total, head_dim, h, t, inv_sqrt,
             weights + (static_cast<size_t>(h) * T + t) * T, ctx);
  }
}

void causal_attention_backward(const double* q, const double* k, const double* v,
                               const double* weights, const double* dctx, int T, int heads,
                               int head_dim, double* dq, double* dk, double* dv) {
  const int d_total = heads * head_dim;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<double> dscores(static_cast<size_t>(heads) * T * T, 0.0);

  for (long long idx = 0; idx < static_cast<long long>(heads) * T; ++idx) {
    const int h = static_cast<int>(idx / T);
    const int t = static_cast<int>(idx % T);
    const int off = h * head_dim;
    const double* wrow = weights + (static_cast<size_t>(h) * T + t) * T;
    double* srow = dscores.data() + (static_cast<size_t>(h) * T + t) * T;
    const double* dcrow = dctx + static_cast<size_t>(t) * d_total + off;

    double wsum = 0.0;
    for (int s = 0; s <= t; ++s) {
      const double dw = dot(dcrow, v + static_cast<size_t>(s) * d_total + off, head_dim);
      srow[s] = dw;
      wsum += wrow[s] * dw;
    }
    for (int s = 0; s <= t; ++s) {
      srow[s] = wrow[s] * (srow[s] - wsum);
    }

    double* dqrow = dq + static_cast<size_t>(t) * d_total + off;
    for (int j = 0; j < head_dim; ++j) {
      double acc = 0.0;
      for (int s = 0; s <= t; ++s) {
        acc += srow[s] * k[static_cast<size_t>(s) * d_total + off + j];
      }
      dqrow[j] += acc * inv_sqrt;
    }
  }

  for (long long idx = 0; idx < static_cast<long long>(heads) * T; ++idx) {
    const int h = static_cast<int>(idx / T);
    const int s = static_cast<int>(idx % T);
    const int off = h * head_dim;
    double* dkrow = dk + static_cast<size_t>(s) * d_total + off;
    double* dvrow = dv + static_cast<size_t>(s) * d_total + off;
    for (int j = 0; j < head_dim; ++j) {
      double acc_k = 0.0;
      double acc_v = 0.0;
      for (int t = s; t < T; ++t) {
        const size_t row = (static_cast<size_t>(h) * T + t) * T + s;
        acc_k += dscores[row] * q[static_cast<size_t>(t) * d_total + off + j];
        acc_v += weights[row] * dctx[static_cast<size_t>(t) * d_total + off + j];
      }
      dkrow[j] += acc_k * inv_sqrt;
      dvrow[j] += acc_v;
    }
  }
}

void logsumexp_rows(const double* logits, int T, int V, double* logZ) {
  for (int t = 0; t < T; ++t) {
    logZ[t] = logsumexp_row(logits + static_cast<size_t>(t) * V, V);
  }
}

void add_rows(double* x, const double* y, int T, int d) {
  for (long long i = 0; i < static_cast<long long>(T) * d; ++i) {
    x[i] += y[i];
  }
}

}  // namespace serial

}  // namespace igrl::kernels
