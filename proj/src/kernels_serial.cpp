// Reference kernels: plain loops, no blocking, no threads.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <vector>

#include "layoutprior/kernels.hpp"

namespace layoutprior::kernels::serial {

namespace {
using std::size_t;
inline size_t at(int r, int c, int stride) {
  return static_cast<size_t>(r) * static_cast<size_t>(stride) + static_cast<size_t>(c);
}
}  // namespace

template <class T>
void matmul(std::span<const T> a, std::span<const T> b, std::span<T> c, int m, int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      T sum = accumulate ? c[at(i, j, n)] : T(0);
      for (int p = 0; p < k; ++p) sum += a[at(i, p, k)] * b[at(p, j, n)];
      c[at(i, j, n)] = sum;
    }
  }
}

template <class T>
void matmul_bt(std::span<const T> a, std::span<const T> b, std::span<T> c, int m, int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      T sum = accumulate ? c[at(i, j, n)] : T(0);
      for (int p = 0; p < k; ++p) sum += a[at(i, p, k)] * b[at(j, p, k)];
      c[at(i, j, n)] = sum;
    }
  }
}

template <class T>
void matmul_at(std::span<const T> a, std::span<const T> b, std::span<T> c, int m, int k, int n, bool accumulate) {
  for (int p = 0; p < k; ++p) {
    for (int j = 0; j < n; ++j) {
      T sum = accumulate ? c[at(p, j, n)] : T(0);
      for (int i = 0; i < m; ++i) sum += a[at(i, p, k)] * b[at(i, j, n)];
      c[at(p, j, n)] = sum;
    }
  }
}

template <class T>
void column_sums(std::span<const T> x, std::span<T> out, int rows, int n) {
  for (int j = 0; j < n; ++j) {
    T sum = out[static_cast<size_t>(j)];
    for (int i = 0; i < rows; ++i) sum += x[at(i, j, n)];
    out[static_cast<size_t>(j)] = sum;
  }
}

template <class T>
void add_bias(std::span<T> y, std::span<const T> bias, int rows, int n) {
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < n; ++j) y[at(i, j, n)] += bias[static_cast<size_t>(j)];
  }
}

template <class T>
void layernorm_forward(std::span<const T> x, std::span<const T> gain, std::span<const T> bias, std::span<T> y,
                       std::span<T> mean, std::span<T> rstd, int rows, int n) {
  constexpr T eps = T(1e-5);
  for (int i = 0; i < rows; ++i) {
    T mu = 0;
    for (int j = 0; j < n; ++j) mu += x[at(i, j, n)];
    mu /= T(n);
    T var = 0;
    for (int j = 0; j < n; ++j) {
      const T d = x[at(i, j, n)] - mu;
      var += d * d;
    }
    var /= T(n);
    const T rs = T(1) / std::sqrt(var + eps);
    for (int j = 0; j < n; ++j) {
      y[at(i, j, n)] = (x[at(i, j, n)] - mu) * rs * gain[static_cast<size_t>(j)] + bias[static_cast<size_t>(j)];
    }
    mean[static_cast<size_t>(i)] = mu;
    rstd[static_cast<size_t>(i)] = rs;
  }
}

template <class T>
void layernorm_backward(std::span<const T> dy, std::span<const T> x, std::span<const T> gain,
                        std::span<const T> mean, std::span<const T> rstd, std::span<T> dx, std::span<T> dgain,
                        std::span<T> dbias, int rows, int n) {
  for (int i = 0; i < rows; ++i) {
    const T mu = mean[static_cast<size_t>(i)];
    const T rs = rstd[static_cast<size_t>(i)];
    T sum_dxhat = 0;
    T sum_dxhat_xhat = 0;
    for (int j = 0; j < n; ++j) {
      const T xhat = (x[at(i, j, n)] - mu) * rs;
      const T dxhat = dy[at(i, j, n)] * gain[static_cast<size_t>(j)];
      sum_dxhat += dxhat;
      sum_dxhat_xhat += dxhat * xhat;
      dgain[static_cast<size_t>(j)] += dy[at(i, j, n)] * xhat;
      dbias[static_cast<size_t>(j)] += dy[at(i, j, n)];
    }
    for (int j = 0; j < n; ++j) {
      const T xhat = (x[at(i, j, n)] - mu) * rs;
      const T dxhat = dy[at(i, j, n)] * gain[static_cast<size_t>(j)];
      dx[at(i, j, n)] = rs * (dxhat - sum_dxhat / T(n) - xhat * sum_dxhat_xhat / T(n));
    }
  }
}

namespace {
template <class T>
constexpr T kGeluC = T(0.7978845608028654);  // sqrt(2/pi)
}

template <class T>
void gelu_forward(std::span<const T> x, std::span<T> y) {
  for (size_t i = 0; i < x.size(); ++i) {
    const T v = x[i];
    y[i] = T(0.5) * v * (T(1) + std::tanh(kGeluC<T> * (v + T(0.044715) * v * v * v)));
  }
}

template <class T>
void gelu_backward(std::span<const T> dy, std::span<const T> x, std::span<T> dx) {
  for (size_t i = 0; i < x.size(); ++i) {
    const T v = x[i];
    const T u = kGeluC<T> * (v + T(0.044715) * v * v * v);
    const T th = std::tanh(u);
    const T du = kGeluC<T> * (T(1) + T(3) * T(0.044715) * v * v);
    const T grad = T(0.5) * (T(1) + th) + T(0.5) * v * (T(1) - th * th) * du;
    dx[i] = dy[i] * grad;
  }
}

template <class T>
void attention_forward(std::span<const T> qkv, std::span<T> probs, std::span<T> out, const AttentionShape& s) {
  const int d = s.embed();
  const int row = 3 * d;
  const T scale = T(1) / std::sqrt(T(s.head_dim));
  for (int b = 0; b < s.batch; ++b) {
    for (int h = 0; h < s.heads; ++h) {
      T* p = probs.data() + (static_cast<size_t>(b) * s.heads + h) * s.seq * s.seq;
      for (int i = 0; i < s.seq; ++i) {
        const T* q = qkv.data() + at(b * s.seq + i, h * s.head_dim, row);
        T maxv = -std::numeric_limits<T>::infinity();
        for (int j = 0; j <= i; ++j) {
          const T* kk = qkv.data() + at(b * s.seq + j, d + h * s.head_dim, row);
          T dot = 0;
          for (int e = 0; e < s.head_dim; ++e) dot += q[e] * kk[e];
          p[at(i, j, s.seq)] = dot * scale;
          maxv = std::max(maxv, dot * scale);
        }
        T denom = 0;
        for (int j = 0; j <= i; ++j) {
          const T e = std::exp(p[at(i, j, s.seq)] - maxv);
          p[at(i, j, s.seq)] = e;
          denom += e;
        }
        for (int j = 0; j < s.seq; ++j) p[at(i, j, s.seq)] = j <= i ? p[at(i, j, s.seq)] / denom : T(0);
        T* o = out.data() + at(b * s.seq + i, h * s.head_dim, d);
        for (int e = 0; e < s.head_dim; ++e) {
          T acc = 0;
          for (int j = 0; j <= i; ++j) acc += p[at(i, j, s.seq)] * qkv[at(b * s.seq + j, 2 * d + h * s.head_dim + e, row)];
          o[e] = acc;
        }
      }
    }
  }
}

template <class T>
void attention_backward(std::span<const T> dout, std::span<const T> qkv, std::span<const T> probs,
                        std::span<T> dqkv, const AttentionShape& s) {
  const int d = s.embed();
  const int row = 3 * d;
  const T scale = T(1) / std::sqrt(T(s.head_dim));
  std::fill(dqkv.begin(), dqkv.end(), T(0));
  std::vector<T> dp(static_cast<size_t>(s.seq));
  for (int b = 0; b < s.batch; ++b) {
    for (int h = 0; h < s.heads; ++h) {
      const T* p = probs.data() + (static_cast<size_t>(b) * s.heads + h) * s.seq * s.seq;
      for (int i = 0; i < s.seq; ++i) {
        const T* go = dout.data() + at(b * s.seq + i, h * s.head_dim, d);
        T weighted = 0;
        for (int j = 0; j <= i; ++j) {
          const T* v = qkv.data() + at(b * s.seq + j, 2 * d + h * s.head_dim, row);
          T* dv = dqkv.data() + at(b * s.seq + j, 2 * d + h * s.head_dim, row);
          T dot = 0;
          for (int e = 0; e < s.head_dim; ++e) {
            dot += go[e] * v[e];
            dv[e] += p[at(i, j, s.seq)] * go[e];
          }
          dp[static_cast<size_t>(j)] = dot;
          weighted += dot * p[at(i, j, s.seq)];
        }
        const T* q = qkv.data() + at(b * s.seq + i, h * s.head_dim, row);
        T* dq = dqkv.data() + at(b * s.seq + i, h * s.head_dim, row);
        for (int j = 0; j <= i; ++j) {
          const T ds = p[at(i, j, s.seq)] * (dp[static_cast<size_t>(j)] - weighted) * scale;
          const T* kk = qkv.data() + at(b * s.seq + j, d + h * s.head_dim, row);
          T* dk = dqkv.data() + at(b * s.seq + j, d + h * s.head_dim, row);
          for (int e = 0; e < s.head_dim; ++e) {
            dq[e] += ds * kk[e];
            dk[e] += ds * q[e];
          }
        }
      }
    }
  }
}

template <class T>
void softmax_xent(std::span<const T> logits, std::span<const int> targets, int ignore, T scale,
                  std::span<T> row_loss, std::span<T> dlogits, int rows, int vocab) {
  for (int i = 0; i < rows; ++i) {
    const T* z = logits.data() + at(i, 0, vocab);
    T* g = dlogits.data() + at(i, 0, vocab);
    const int t = targets[static_cast<size_t>(i)];
    if (t == ignore) {
      row_loss[static_cast<size_t>(i)] = 0;
      std::fill(g, g + vocab, T(0));
      continue;
    }
    T maxv = z[0];
    for (int j = 1; j < vocab; ++j) maxv = std::max(maxv, z[j]);
    T denom = 0;
    for (int j = 0; j < vocab; ++j) denom += std::exp(z[j] - maxv);
    const T lse = maxv + std::log(denom);
    row_loss[static_cast<size_t>(i)] = lse - z[t];
    for (int j = 0; j < vocab; ++j) g[j] = std::exp(z[j] - lse) * scale;
    g[t] -= scale;
  }
}

#define LAYOUTPRIOR_INSTANTIATE(T)                                                                          \
  template void matmul<T>(std::span<const T>, std::span<const T>, std::span<T>, int, int, int, bool);     \
  template void matmul_bt<T>(std::span<const T>, std::span<const T>, std::span<T>, int, int, int, bool);  \
  template void matmul_at<T>(std::span<const T>, std::span<const T>, std::span<T>, int, int, int, bool);  \
  template void column_sums<T>(std::span<const T>, std::span<T>, int, int);                               \
  template void add_bias<T>(std::span<T>, std::span<const T>, int, int);                                  \
  template void layernorm_forward<T>(std::span<const T>, std::span<const T>, std::span<const T>,          \
                                     std::span<T>, std::span<T>, std::span<T>, int, int);                 \
  template void layernorm_backward<T>(std::span<const T>, std::span<const T>, std::span<const T>,         \
                                      std::span<const T>, std::span<const T>, std::span<T>, std::span<T>, \
                                      std::span<T>, int, int);                                            \
  template void gelu_forward<T>(std::span<const T>, std::span<T>);                                        \
  template void gelu_backward<T>(std::span<const T>, std::span<const T>, std::span<T>);                   \
  template void attention_forward<T>(std::span<const T>, std::span<T>, std::span<T>,                      \
                                     const AttentionShape&);                                              \
  template void attention_backward<T>(std::span<const T>, std::span<const T>, std::span<const T>,         \
                                      std::span<T>, const AttentionShape&);                               \
  template void softmax_xent<T>(std::span<const T>, std::span<const int>, int, T, std::span<T>,           \
                                std::span<T>, int, int);

LAYOUTPRIOR_INSTANTIATE(float)
LAYOUTPRIOR_INSTANTIATE(double)

}  // namespace layoutprior::kernels::serial
