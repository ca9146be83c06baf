#pragma once

#include <span>

// Dense kernels behind the transformer. All matrices are row-major.
//
// `serial` is the straightforward reference kept for testing; `parallel`
// is the OpenMP/SIMD version the model runs. Both produce the same result
// up to floating-point summation order. In `parallel`, every output element
// is owned by exactly one thread and summed in a fixed order, so results do
// not depend on the thread count.

namespace layoutprior::kernels {

struct AttentionShape {
  int batch = 1;
  int seq = 1;
  int heads = 1;
  int head_dim = 1;

  int embed() const { return heads * head_dim; }
};

#define LAYOUTPRIOR_KERNEL_DECLS                                                                          \
  /* C[m x n] (+)= A[m x k] * B[k x n] */                                                                 \
  template <class T>                                                                                      \
  void matmul(std::span<const T> a, std::span<const T> b, std::span<T> c, int m, int k, int n,           \
              bool accumulate);                                                                           \
  /* C[m x n] (+)= A[m x k] * B[n x k]^T */                                                               \
  template <class T>                                                                                      \
  void matmul_bt(std::span<const T> a, std::span<const T> b, std::span<T> c, int m, int k, int n,        \
                 bool accumulate);                                                                        \
  /* C[k x n] (+)= A[m x k]^T * B[m x n] */                                                               \
  template <class T>                                                                                      \
  void matmul_at(std::span<const T> a, std::span<const T> b, std::span<T> c, int m, int k, int n,        \
                 bool accumulate);                                                                        \
  /* out[j] += sum_i x[i x n + j] */                                                                      \
  template <class T>                                                                                      \
  void column_sums(std::span<const T> x, std::span<T> out, int rows, int n);                             \
  template <class T>                                                                                      \
  void add_bias(std::span<T> y, std::span<const T> bias, int rows, int n);                               \
  template <class T>                                                                                      \
  void layernorm_forward(std::span<const T> x, std::span<const T> gain, std::span<const T> bias,         \
                         std::span<T> y, std::span<T> mean, std::span<T> rstd, int rows, int n);         \
  /* dx is overwritten; dgain/dbias accumulate */                                                         \
  template <class T>                                                                                      \
  void layernorm_backward(std::span<const T> dy, std::span<const T> x, std::span<const T> gain,          \
                          std::span<const T> mean, std::span<const T> rstd, std::span<T> dx,             \
                          std::span<T> dgain, std::span<T> dbias, int rows, int n);                      \
  template <class T>                                                                                      \
  void gelu_forward(std::span<const T> x, std::span<T> y);                                               \
  /* dx = dy * gelu'(x) */                                                                                \
  template <class T>                                                                                      \
  void gelu_backward(std::span<const T> dy, std::span<const T> x, std::span<T> dx);                      \
  /* qkv: [batch*seq x 3*embed] (q | k | v); probs: [batch*heads x seq x seq]; out: [batch*seq x embed] */ \
  template <class T>                                                                                      \
  void attention_forward(std::span<const T> qkv, std::span<T> probs, std::span<T> out,                   \
                         const AttentionShape& shape);                                                    \
  /* dqkv is overwritten */                                                                               \
  template <class T>                                                                                      \
  void attention_backward(std::span<const T> dout, std::span<const T> qkv, std::span<const T> probs,     \
                          std::span<T> dqkv, const AttentionShape& shape);                               \
  /* Row-wise softmax cross-entropy. Rows whose target is `ignore` get zero loss and zero gradient.       \
     dlogits = (softmax - onehot) * scale. Per-row losses land in row_loss. */                            \
  template <class T>                                                                                      \
  void softmax_xent(std::span<const T> logits, std::span<const int> targets, int ignore, T scale,        \
                    std::span<T> row_loss, std::span<T> dlogits, int rows, int vocab);

namespace serial {
LAYOUTPRIOR_KERNEL_DECLS
}  // namespace serial

namespace parallel {
LAYOUTPRIOR_KERNEL_DECLS
}  // namespace parallel

#undef LAYOUTPRIOR_KERNEL_DECLS

}  // namespace layoutprior::kernels
