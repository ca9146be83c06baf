#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <type_traits>
#include <limits>
#include <vector>

#include "layoutprior/kernels.hpp"

namespace layoutprior::kernels::parallel {

namespace {

using std::size_t;

constexpr int kRowBlock = 4;
constexpr int kColBlock = 32;

inline size_t at(int r, int c, int stride) {
  return static_cast<size_t>(r) * static_cast<size_t>(stride) + static_cast<size_t>(c);
}

// Branch-free exp for float so elementwise loops vectorize; relative error
// about 2 ulp. Double keeps the library functions (gradient checks).
inline float fast_exp(float x) {
  x = std::min(std::max(x, -87.0f), 88.0f);
  const float n = std::floor(x * 1.44269504f + 0.5f);
  const float r = (x - n * 0.693359375f) + n * 2.12194440e-4f;
  float p = 1.9875691500e-4f;
  p = p * r + 1.3981999507e-3f;
  p = p * r + 8.3334519073e-3f;
  p = p * r + 4.1665795894e-2f;
  p = p * r + 1.6666665459e-1f;
  p = p * r + 5.0000001201e-1f;
  p = p * r * r + r + 1.0f;
  return p * std::bit_cast<float>((static_cast<int>(n) + 127) << 23);
}

template <class T>
inline T vexp(T x) {
  if constexpr (std::is_same_v<T, float>) {
    return fast_exp(x);
  } else {
    return std::exp(x);
  }
}

template <class T>
inline T vtanh(T x) {
  if constexpr (std::is_same_v<T, float>) {
    return 1.0f - 2.0f / (fast_exp(2.0f * x) + 1.0f);
  } else {
    return std::tanh(x);
  }
}

// acc[r][j] = sum_p a(r, p) * b[p * n + j] over a 4 x 32 register tile.
// `a_of(r, p)` abstracts row-major A (matmul) vs transposed A (matmul_at).
template <class T, class AOf>
inline void tile_full(AOf a_of, const T* b, T* c, int rows, int k, int n, int jb, bool accumulate) {
  T acc[kRowBlock][kColBlock];
  for (int r = 0; r < kRowBlock; ++r) {
    for (int j = 0; j < kColBlock; ++j) acc[r][j] = accumulate && r < rows ? c[at(r, jb + j, n)] : T(0);
  }
  if (rows == kRowBlock) {
    for (int p = 0; p < k; ++p) {
      const T a0 = a_of(0, p), a1 = a_of(1, p), a2 = a_of(2, p), a3 = a_of(3, p);
      const T* brow = b + at(p, jb, n);
#pragma omp simd
      for (int j = 0; j < kColBlock; ++j) {
        acc[0][j] += a0 * brow[j];
        acc[1][j] += a1 * brow[j];
        acc[2][j] += a2 * brow[j];
        acc[3][j] += a3 * brow[j];
      }
    }
  } else {
    for (int p = 0; p < k; ++p) {
      const T* brow = b + at(p, jb, n);
      for (int r = 0; r < rows; ++r) {
        const T ar = a_of(r, p);
#pragma omp simd
        for (int j = 0; j < kColBlock; ++j) acc[r][j] += ar * brow[j];
      }
    }
  }
  for (int r = 0; r < rows; ++r) {
    for (int j = 0; j < kColBlock; ++j) c[at(r, jb + j, n)] = acc[r][j];
  }
}

template <class T, class AOf>
inline void tile_tail(AOf a_of, const T* b, T* c, int rows, int k, int n, int jb, bool accumulate) {
  const int width = n - jb;
  for (int r = 0; r < rows; ++r) {
    T* crow = c + at(r, jb, n);
    if (!accumulate) std::fill(crow, crow + width, T(0));
    for (int p = 0; p < k; ++p) {
      const T ar = a_of(r, p);
      const T* brow = b + at(p, jb, n);
      for (int j = 0; j < width; ++j) crow[j] += ar * brow[j];
    }
  }
}

template <class T, class AOf>
inline void row_block(AOf a_of, const T* b, T* c, int rows, int k, int n, bool accumulate) {
  int jb = 0;
  for (; jb + kColBlock <= n; jb += kColBlock) tile_full<T>(a_of, b, c, rows, k, n, jb, accumulate);
  if (jb < n) tile_tail<T>(a_of, b, c, rows, k, n, jb, accumulate);
}

}  // namespace

template <class T>
void matmul(std::span<const T> a, std::span<const T> b, std::span<T> c, int m, int k, int n, bool accumulate) {
  const T* A = a.data();
  const T* B = b.data();
  T* C = c.data();
#pragma omp parallel for schedule(static)
  for (int ib = 0; ib < m; ib += kRowBlock) {
    const int rows = std::min(kRowBlock, m - ib);
    const T* arow = A + at(ib, 0, k);
    auto a_of = [arow, k](int r, int p) { return arow[at(r, p, k)]; };
    row_block<T>(a_of, B, C + at(ib, 0, n), rows, k, n, accumulate);
  }
}

template <class T>
void matmul_bt(std::span<const T> a, std::span<const T> b, std::span<T> c, int m, int k, int n, bool accumulate) {
  // Transposing B once turns the dot-product form into the streaming form.
  std::vector<T> bt(static_cast<size_t>(k) * static_cast<size_t>(n));
#pragma omp parallel for schedule(static)
  for (int j = 0; j < n; ++j) {
    for (int p = 0; p < k; ++p) bt[at(p, j, n)] = b[at(j, p, k)];
  }
  matmul<T>(a, std::span<const T>(bt), c, m, k, n, accumulate);
}

template <class T>
void matmul_at(std::span<const T> a, std::span<const T> b, std::span<T> c, int m, int k, int n, bool accumulate) {
  // Output rows are indexed by A's columns; transposing A keeps the streaming form.
  std::vector<T> at_buf(static_cast<size_t>(k) * static_cast<size_t>(m));
#pragma omp parallel for schedule(static)
  for (int p = 0; p < k; ++p) {
    for (int i = 0; i < m; ++i) at_buf[at(p, i, m)] = a[at(i, p, k)];
  }
  matmul<T>(std::span<const T>(at_buf), b, c, k, m, n, accumulate);
}

template <class T>
void column_sums(std::span<const T> x, std::span<T> out, int rows, int n) {
#pragma omp parallel for schedule(static)
  for (int jb = 0; jb < n; jb += kColBlock) {
    const int width = std::min(kColBlock, n - jb);
    T acc[kColBlock];
    for (int j = 0; j < width; ++j) acc[j] = out[static_cast<size_t>(jb + j)];
    for (int i = 0; i < rows; ++i) {
      const T* row = x.data() + at(i, jb, n);
      for (int j = 0; j < width; ++j) acc[j] += row[j];
    }
    for (int j = 0; j < width; ++j) out[static_cast<size_t>(jb + j)] = acc[j];
  }
}

template <class T>
void add_bias(std::span<T> y, std::span<const T> bias, int rows, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i) {
    T* row = y.data() + at(i, 0, n);
#pragma omp simd
    for (int j = 0; j < n; ++j) row[j] += bias[static_cast<size_t>(j)];
  }
}

template <class T>
void layernorm_forward(std::span<const T> x, std::span<const T> gain, std::span<const T> bias, std::span<T> y,
                       std::span<T> mean, std::span<T> rstd, int rows, int n) {
  constexpr T eps = T(1e-5);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i) {
    const T* xr = x.data() + at(i, 0, n);
    T* yr = y.data() + at(i, 0, n);
    T mu = 0;
    for (int j = 0; j < n; ++j) mu += xr[j];
    mu /= T(n);
    T var = 0;
    for (int j = 0; j < n; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= T(n);
    const T rs = T(1) / std::sqrt(var + eps);
#pragma omp simd
    for (int j = 0; j < n; ++j) yr[j] = (xr[j] - mu) * rs * gain[static_cast<size_t>(j)] + bias[static_cast<size_t>(j)];
    mean[static_cast<size_t>(i)] = mu;
    rstd[static_cast<size_t>(i)] = rs;
  }
}

template <class T>
void layernorm_backward(std::span<const T> dy, std::span<const T> x, std::span<const T> gain,
                        std::span<const T> mean, std::span<const T> rstd, std::span<T> dx, std::span<T> dgain,
                        std::span<T> dbias, int rows, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i) {
    const T* xr = x.data() + at(i, 0, n);
    const T* gr = dy.data() + at(i, 0, n);
    T* dr = dx.data() + at(i, 0, n);
    const T mu = mean[static_cast<size_t>(i)];
    const T rs = rstd[static_cast<size_t>(i)];
    T sum_dxhat = 0;
    T sum_dxhat_xhat = 0;
    for (int j = 0; j < n; ++j) {
      const T dxhat = gr[j] * gain[static_cast<size_t>(j)];
      sum_dxhat += dxhat;
      sum_dxhat_xhat += dxhat * (xr[j] - mu) * rs;
    }
    const T m1 = sum_dxhat / T(n);
    const T m2 = sum_dxhat_xhat / T(n);
#pragma omp simd
    for (int j = 0; j < n; ++j) {
      const T xhat = (xr[j] - mu) * rs;
      dr[j] = rs * (gr[j] * gain[static_cast<size_t>(j)] - m1 - xhat * m2);
    }
  }
  // Parameter gradients: one owner per column, rows summed in order.
#pragma omp parallel for schedule(static)
  for (int jb = 0; jb < n; jb += kColBlock) {
    const int width = std::min(kColBlock, n - jb);
    for (int i = 0; i < rows; ++i) {
      const T mu = mean[static_cast<size_t>(i)];
      const T rs = rstd[static_cast<size_t>(i)];
      const T* xr = x.data() + at(i, jb, n);
      const T* gr = dy.data() + at(i, jb, n);
      for (int j = 0; j < width; ++j) {
        dgain[static_cast<size_t>(jb + j)] += gr[j] * (xr[j] - mu) * rs;
        dbias[static_cast<size_t>(jb + j)] += gr[j];
      }
    }
  }
}

namespace {
template <class T>
constexpr T kGeluC = T(0.7978845608028654);
}

template <class T>
void gelu_forward(std::span<const T> x, std::span<T> y) {
  const auto count = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for simd schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const T v = x[static_cast<size_t>(i)];
    y[static_cast<size_t>(i)] = T(0.5) * v * (T(1) + vtanh(kGeluC<T> * (v + T(0.044715) * v * v * v)));
  }
}

template <class T>
void gelu_backward(std::span<const T> dy, std::span<const T> x, std::span<T> dx) {
  const auto count = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for simd schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const T v = x[static_cast<size_t>(i)];
    const T th = vtanh(kGeluC<T> * (v + T(0.044715) * v * v * v));
    const T du = kGeluC<T> * (T(1) + T(3) * T(0.044715) * v * v);
    dx[static_cast<size_t>(i)] =
        dy[static_cast<size_t>(i)] * (T(0.5) * (T(1) + th) + T(0.5) * v * (T(1) - th * th) * du);
  }
}

template <class T>
void attention_forward(std::span<const T> qkv, std::span<T> probs, std::span<T> out, const AttentionShape& s) {
  const int d = s.embed();
  const int row = 3 * d;
  const int hd = s.head_dim;
  const T scale = T(1) / std::sqrt(T(hd));
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < s.batch; ++b) {
    for (int h = 0; h < s.heads; ++h) {
      T* p = probs.data() + (static_cast<size_t>(b) * s.heads + h) * s.seq * s.seq;
      const T* base = qkv.data() + at(b * s.seq, 0, row);
      for (int i = 0; i < s.seq; ++i) {
        const T* q = base + at(i, h * hd, row);
        T* pr = p + at(i, 0, s.seq);
        T maxv = -std::numeric_limits<T>::infinity();
        for (int j = 0; j <= i; ++j) {
          const T* kk = base + at(j, d + h * hd, row);
          T dot = 0;
#pragma omp simd reduction(+ : dot)
          for (int e = 0; e < hd; ++e) dot += q[e] * kk[e];
          pr[j] = dot * scale;
          maxv = std::max(maxv, pr[j]);
        }
        T denom = 0;
#pragma omp simd reduction(+ : denom)
        for (int j = 0; j <= i; ++j) {
          pr[j] = vexp(pr[j] - maxv);
          denom += pr[j];
        }
        const T inv = T(1) / denom;
        for (int j = 0; j <= i; ++j) pr[j] *= inv;
        std::fill(pr + i + 1, pr + s.seq, T(0));
        T* o = out.data() + at(b * s.seq + i, h * hd, d);
        std::fill(o, o + hd, T(0));
        for (int j = 0; j <= i; ++j) {
          const T* v = base + at(j, 2 * d + h * hd, row);
          const T w = pr[j];
#pragma omp simd
          for (int e = 0; e < hd; ++e) o[e] += w * v[e];
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
  const int hd = s.head_dim;
  const T scale = T(1) / std::sqrt(T(hd));
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < s.batch; ++b) {
    for (int h = 0; h < s.heads; ++h) {
      std::vector<T> dp(static_cast<size_t>(s.seq));
      const T* p = probs.data() + (static_cast<size_t>(b) * s.heads + h) * s.seq * s.seq;
      const T* base = qkv.data() + at(b * s.seq, 0, row);
      T* gbase = dqkv.data() + at(b * s.seq, 0, row);
      for (int i = 0; i < s.seq; ++i) {
        for (int part = 0; part < 3; ++part) {
          T* g = gbase + at(i, part * d + h * hd, row);
          std::fill(g, g + hd, T(0));
        }
      }
      for (int i = 0; i < s.seq; ++i) {
        const T* go = dout.data() + at(b * s.seq + i, h * hd, d);
        const T* pr = p + at(i, 0, s.seq);
        T weighted = 0;
        for (int j = 0; j <= i; ++j) {
          const T* v = base + at(j, 2 * d + h * hd, row);
          T* dv = gbase + at(j, 2 * d + h * hd, row);
          const T w = pr[j];
          T dot = 0;
#pragma omp simd reduction(+ : dot)
          for (int e = 0; e < hd; ++e) {
            dot += go[e] * v[e];
            dv[e] += w * go[e];
          }
          dp[static_cast<size_t>(j)] = dot;
          weighted += dot * w;
        }
        const T* q = base + at(i, h * hd, row);
        T* dq = gbase + at(i, h * hd, row);
        for (int j = 0; j <= i; ++j) {
          const T ds = pr[j] * (dp[static_cast<size_t>(j)] - weighted) * scale;
          const T* kk = base + at(j, d + h * hd, row);
          T* dk = gbase + at(j, d + h * hd, row);
#pragma omp simd
          for (int e = 0; e < hd; ++e) {
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
#pragma omp parallel for schedule(static)
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
#pragma omp simd reduction(max : maxv)
    for (int j = 1; j < vocab; ++j) maxv = std::max(maxv, z[j]);
    T denom = 0;
#pragma omp simd reduction(+ : denom)
    for (int j = 0; j < vocab; ++j) denom += vexp(z[j] - maxv);
    const T lse = maxv + std::log(denom);
    row_loss[static_cast<size_t>(i)] = lse - z[t];
#pragma omp simd
    for (int j = 0; j < vocab; ++j) g[j] = vexp(z[j] - lse) * scale;
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

}  // namespace layoutprior::kernels::parallel
