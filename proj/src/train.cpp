#include "layoutprior/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "layoutprior/error.hpp"

namespace layoutprior {

void TrainConfig::validate() const {
  auto bad = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, "train config: " + why); };
  if (!(learning_rate >= 0.0)) bad("learning_rate must be non-negative");
  if (batch_size <= 0) bad("batch_size must be positive");
  if (total_steps < 0) bad("total_steps must be non-negative");
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) bad("warmup_fraction must be in [0, 1]");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) bad("betas must be in [0, 1)");
  if (!(epsilon > 0.0)) bad("epsilon must be positive");
  if (!(clip_norm > 0.0)) bad("clip_norm must be positive");
}

TrainState::TrainState(Parameters<float> params, std::uint64_t seed)
    : model(std::move(params)),
      m(model.config()),
      v(model.config()),
      grads(model.config()),
      rng(seed) {}

void init_number_embeddings(Parameters<float>& params, const Vocabulary& vocab) {
  Tensor<float>& emb = params.token_embedding();
  const int d = params.config().embed_dim;
  const int pairs = d / 2;
  const double scale = 0.02 * std::sqrt(2.0);
  const double two_pi = 2.0 * std::acos(-1.0);
  for (int id = 0; id < vocab.size() && id < params.config().vocab_size; ++id) {
    if (vocab.kind(id) != TokenKind::Integer) continue;
    const double value = std::stod(vocab.token(id));
    float* row = emb.data.data() + static_cast<std::size_t>(id) * static_cast<std::size_t>(d);
    for (int i = 0; i < pairs; ++i) {
      const double frac = pairs > 1 ? static_cast<double>(i) / static_cast<double>(pairs - 1) : 0.0;
      const double period = 2.0 * std::pow(512.0, frac);
      const double angle = two_pi * value / period;
      row[2 * i] = static_cast<float>(scale * std::sin(angle));
      row[2 * i + 1] = static_cast<float>(scale * std::cos(angle));
    }
  }
}

double learning_rate_at(const TrainConfig& config, std::int64_t step) {
  const auto warmup = static_cast<std::int64_t>(std::ceil(config.warmup_fraction * static_cast<double>(config.total_steps)));
  if (warmup <= 0 || step >= warmup) return config.learning_rate;
  return config.learning_rate * static_cast<double>(step + 1) / static_cast<double>(warmup);
}

StepResult train_step(TrainState& state, const Batch& batch, const TrainConfig& config) {
  StepResult out;
  std::mt19937_64* dropout_rng = state.model.config().dropout > 0.0 ? &state.rng : nullptr;
  out.loss = state.model.loss_and_gradients(batch, state.grads, dropout_rng);
  if (!std::isfinite(out.loss) || !state.grads.all_finite()) {
    throw Error(ErrorCode::NonFiniteLoss, "non-finite loss or gradient at step " + std::to_string(state.step) +
                                              " (loss " + std::to_string(out.loss) + ")");
  }

  double sq = 0.0;
  for (const auto& g : state.grads.tensors()) {
    for (float x : g.data) sq += static_cast<double>(x) * static_cast<double>(x);
  }
  out.grad_norm = std::sqrt(sq);
  const double clip = out.grad_norm > config.clip_norm ? config.clip_norm / out.grad_norm : 1.0;

  out.learning_rate = learning_rate_at(config, state.step);
  const double t = static_cast<double>(state.step + 1);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  const auto b1 = static_cast<float>(config.beta1);
  const auto b2 = static_cast<float>(config.beta2);
  const auto lr = static_cast<float>(out.learning_rate / c1);
  const auto inv_c2 = static_cast<float>(1.0 / c2);
  const auto eps = static_cast<float>(config.epsilon);
  const auto scale = static_cast<float>(clip);

  auto& params = state.model.params().tensors();
  for (std::size_t i = 0; i < params.size(); ++i) {
    float* p = params[i].data.data();
    float* m = state.m.tensors()[i].data.data();
    float* v = state.v.tensors()[i].data.data();
    const float* g = state.grads.tensors()[i].data.data();
    const std::size_t n = params[i].data.size();
    for (std::size_t j = 0; j < n; ++j) {
      const float gj = g[j] * scale;
      m[j] = b1 * m[j] + (1.0f - b1) * gj;
      v[j] = b2 * v[j] + (1.0f - b2) * gj * gj;
      p[j] -= lr * m[j] / (std::sqrt(v[j] * inv_c2) + eps);
    }
  }
  ++state.step;
  return out;
}

BatchLoader::BatchLoader(std::span<const TokenSeq> sequences, int batch_size, std::uint64_t seed)
    : sequences_(sequences.begin(), sequences.end()), batch_size_(batch_size), rng_(seed) {
  if (sequences_.empty()) throw Error(ErrorCode::EmptyCorpus, "no training sequences");
  if (batch_size <= 0) throw Error(ErrorCode::InvalidConfig, "batch_size must be positive");
}

void BatchLoader::refill() {
  std::ostringstream saved;
  saved << rng_;
  epoch_rng_ = saved.str();
  std::vector<std::size_t> order(sequences_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng_);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sequences_[a].size() < sequences_[b].size(); });
  batches_.clear();
  const auto bs = static_cast<std::size_t>(batch_size_);
  for (std::size_t i = 0; i < order.size(); i += bs) {
    batches_.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                          order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + bs)));
  }
  std::shuffle(batches_.begin(), batches_.end(), rng_);
  cursor_ = 0;
  ++epoch_;
}

Batch BatchLoader::next() {
  if (cursor_ >= batches_.size()) refill();
  std::vector<TokenSeq> picked;
  for (std::size_t i : batches_[cursor_]) picked.push_back(sequences_[i]);
  ++cursor_;
  return make_batch(picked);
}

std::string BatchLoader::state() const {
  return std::to_string(epoch_) + " " + std::to_string(cursor_) + " " + epoch_rng_;
}

void BatchLoader::restore(const std::string& state) {
  std::istringstream in(state);
  std::int64_t epoch = 0;
  std::size_t cursor = 0;
  in >> epoch >> cursor;
  if (!in) throw Error(ErrorCode::MalformedFile, "unreadable batch loader state");
  if (epoch == 0) {
    batches_.clear();
    cursor_ = 0;
    epoch_ = 0;
    return;
  }
  in >> rng_;
  if (!in) throw Error(ErrorCode::MalformedFile, "unreadable batch loader rng state");
  epoch_ = epoch - 1;
  refill();
  cursor_ = cursor;
}

}  // namespace layoutprior
