#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "layoutprior/tokenizer.hpp"

namespace layoutprior {

struct ModelConfig {
  int vocab_size = 0;
  int context = 256;  // k: longest input the model attends over
  int layers = 2;
  int heads = 4;
  int embed_dim = 128;
  double dropout = 0.0;
  std::uint64_t seed = 0;

  int head_dim() const { return embed_dim / heads; }
  /// Throws InvalidConfig.
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <class T>
struct Tensor {
  std::string name;
  std::vector<int> shape;
  std::vector<T> data;

  std::span<T> span() { return data; }
  std::span<const T> span() const { return data; }
};

enum class LayerTensor {
  Ln1Gain,
  Ln1Bias,
  QkvWeight,   // [d x 3d]
  QkvBias,
  ProjWeight,  // [d x d]
  ProjBias,
  Ln2Gain,
  Ln2Bias,
  FcWeight,    // [d x 4d]
  FcBias,
  OutWeight,   // [4d x d]
  OutBias,
};
inline constexpr int kLayerTensors = 12;

/// Pre-norm decoder-only transformer weights. The output projection is tied
/// to the token embedding.
template <class T>
class Parameters {
 public:
  Parameters() = default;
  /// Zero-filled tensors with the layout implied by `config`.
  explicit Parameters(const ModelConfig& config);
  /// N(0, 0.02) weights, zero biases, unit layer-norm gains; deterministic in config.seed.
  static Parameters init(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  std::vector<Tensor<T>>& tensors() { return tensors_; }
  const std::vector<Tensor<T>>& tensors() const { return tensors_; }

  Tensor<T>& token_embedding() { return tensors_[0]; }
  const Tensor<T>& token_embedding() const { return tensors_[0]; }
  Tensor<T>& position_embedding() { return tensors_[1]; }
  const Tensor<T>& position_embedding() const { return tensors_[1]; }
  Tensor<T>& layer(int l, LayerTensor which) { return tensors_[index(l, which)]; }
  const Tensor<T>& layer(int l, LayerTensor which) const { return tensors_[index(l, which)]; }
  Tensor<T>& final_gain() { return tensors_[tensors_.size() - 2]; }
  const Tensor<T>& final_gain() const { return tensors_[tensors_.size() - 2]; }
  Tensor<T>& final_bias() { return tensors_.back(); }
  const Tensor<T>& final_bias() const { return tensors_.back(); }

  std::size_t parameter_count() const;
  void zero();
  bool all_finite() const;

  template <class U>
  Parameters<U> cast() const;

 private:
  static std::size_t index(int l, LayerTensor which) {
    return 2 + static_cast<std::size_t>(l) * kLayerTensors + static_cast<std::size_t>(which);
  }

  ModelConfig config_;
  std::vector<Tensor<T>> tensors_;
};

/// Padded next-token batch: inputs[b*seq + t] predicts targets[b*seq + t].
/// Padding targets are Vocabulary::kPad and carry no loss.
struct Batch {
  int batch = 0;
  int seq = 0;
  std::vector<int> inputs;
  std::vector<int> targets;
};

/// Shifts each encoded sequence (BOS..EOS) into input/target pairs and pads
/// to the longest one.
Batch make_batch(std::span<const TokenSeq> sequences);

/// Logits [batch x seq x V]. Throws SequenceTooLong when seq > context.
template <class T>
std::vector<T> forward(const Parameters<T>& params, std::span<const int> tokens, int batch, int seq);

/// Mean negative log-likelihood (nats/token) over rows whose target is not
/// `ignore`. Throws AllPadded when every row is ignored.
template <class T>
double nll_loss(std::span<const T> logits, std::span<const int> targets, int vocab,
                int ignore = Vocabulary::kPad);

/// Activation storage reused across training steps.
template <class T>
struct Workspace;

template <class T>
class Model {
 public:
  explicit Model(Parameters<T> params);
  ~Model();
  Model(Model&&) noexcept;
  Model& operator=(Model&&) noexcept;

  const Parameters<T>& params() const { return params_; }
  Parameters<T>& params() { return params_; }
  const ModelConfig& config() const { return params_.config(); }

  /// Forward + backward. Overwrites `grads` with d(mean NLL)/d(params) and
  /// returns the mean NLL. Dropout applies only when `dropout_rng` is given.
  T loss_and_gradients(const Batch& batch, Parameters<T>& grads, std::mt19937_64* dropout_rng = nullptr);
  /// Forward only, same loss as above without dropout.
  T loss(const Batch& batch);

 private:
  T run_forward(const Batch& batch, std::mt19937_64* dropout_rng);

  Parameters<T> params_;
  std::unique_ptr<Workspace<T>> ws_;
};

/// Incremental decoding with a key/value cache; one token at a time.
template <class T>
class DecodeSession {
 public:
  explicit DecodeSession(const Parameters<T>& params);

  void reset();
  /// Appends `token` and returns next-token logits [V]. Throws
  /// SequenceTooLong once the context window is full.
  std::span<const T> push(int token);
  int length() const { return length_; }

 private:
  const Parameters<T>* params_;
  std::vector<T> embedding_t_;  // [d x V]
  std::vector<std::vector<T>> keys_, values_;  // per layer [context x d]
  std::vector<T> x_, a_, qkv_, att_, tmp_, hidden_, act_, logits_, scores_, mean_, rstd_;
  int length_ = 0;
};

}  // namespace layoutprior
