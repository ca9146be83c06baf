#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "layoutprior/model.hpp"

namespace layoutprior {

struct TrainConfig {
  double learning_rate = 3e-4;
  int batch_size = 32;
  std::int64_t total_steps = 1000;
  double warmup_fraction = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 1.0;

  void validate() const;
};

/// Parameters, Adam moments, step counter and the dropout stream.
struct TrainState {
  Model<float> model;
  Parameters<float> m;
  Parameters<float> v;
  Parameters<float> grads;
  std::int64_t step = 0;
  std::mt19937_64 rng;

  explicit TrainState(Parameters<float> params, std::uint64_t seed = 0);
};

/// Overwrites the embedding rows of integer tokens with sin/cos features of
/// their value at geometrically spaced periods from 2 to 1024, scaled to the
/// initial weight scale.
void init_number_embeddings(Parameters<float>& params, const Vocabulary& vocab);

/// Linear warmup over warmup_fraction of total_steps, then constant.
double learning_rate_at(const TrainConfig& config, std::int64_t step);

struct StepResult {
  double loss = 0.0;
  double grad_norm = 0.0;  // before clipping
  double learning_rate = 0.0;
};

/// One Adam update with global-norm clipping. Throws NonFiniteLoss.
StepResult train_step(TrainState& state, const Batch& batch, const TrainConfig& config);

/// Length-bucketed batches: each epoch shuffles, sorts by length, cuts
/// batches and shuffles their order. Deterministic in the seed.
class BatchLoader {
 public:
  BatchLoader(std::span<const TokenSeq> sequences, int batch_size, std::uint64_t seed);

  Batch next();
  std::int64_t epoch() const { return epoch_; }
  /// Position within the epoch stream, for checkpoint resume.
  std::string state() const;
  void restore(const std::string& state);

 private:
  void refill();

  std::vector<TokenSeq> sequences_;
  int batch_size_;
  std::mt19937_64 rng_;
  std::string epoch_rng_;  // rng_ before the current epoch was drawn
  std::vector<std::vector<std::size_t>> batches_;
  std::size_t cursor_ = 0;
  std::int64_t epoch_ = 0;
};

}  // namespace layoutprior
