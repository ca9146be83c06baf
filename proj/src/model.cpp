#include "layoutprior/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "layoutprior/error.hpp"
#include "layoutprior/kernels.hpp"

namespace layoutprior {

namespace k = kernels::parallel;

void ModelConfig::validate() const {
  auto bad = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, "model config: " + why); };
  if (vocab_size <= 4) bad("vocab_size must exceed the reserved tokens");
  if (context < 2) bad("context must be at least 2");
  if (layers <= 0 || heads <= 0 || embed_dim <= 0) bad("layers, heads and embed_dim must be positive");
  if (embed_dim % heads != 0) bad("embed_dim " + std::to_string(embed_dim) + " is not divisible by heads " + std::to_string(heads));
  if (!(dropout >= 0.0 && dropout < 1.0)) bad("dropout must be in [0, 1)");
}

// ---------------------------------------------------------------------------
// parameters

template <class T>
Parameters<T>::Parameters(const ModelConfig& config) : config_(config) {
  config.validate();
  const int d = config.embed_dim;
  auto add = [&](std::string name, std::vector<int> shape) {
    std::size_t n = 1;
    for (int s : shape) n *= static_cast<std::size_t>(s);
    tensors_.push_back({std::move(name), std::move(shape), std::vector<T>(n, T(0))});
  };
  add("wte", {config.vocab_size, d});
  add("wpe", {config.context, d});
  for (int l = 0; l < config.layers; ++l) {
    const std::string p = "h" + std::to_string(l) + ".";
    add(p + "ln1.g", {d});
    add(p + "ln1.b", {d});
    add(p + "attn.qkv.w", {d, 3 * d});
    add(p + "attn.qkv.b", {3 * d});
    add(p + "attn.proj.w", {d, d});
    add(p + "attn.proj.b", {d});
    add(p + "ln2.g", {d});
    add(p + "ln2.b", {d});
    add(p + "mlp.fc.w", {d, 4 * d});
    add(p + "mlp.fc.b", {4 * d});
    add(p + "mlp.proj.w", {4 * d, d});
    add(p + "mlp.proj.b", {d});
  }
  add("lnf.g", {d});
  add("lnf.b", {d});
}

template <class T>
Parameters<T> Parameters<T>::init(const ModelConfig& config) {
  Parameters p(config);
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  for (Tensor<T>& t : p.tensors_) {
    const bool gain = t.name.ends_with(".g");
    const bool bias = t.name.ends_with(".b");
    for (T& v : t.data) {
      if (gain) {
        v = T(1);
      } else if (!bias) {
        v = static_cast<T>(normal(rng));
      }
    }
  }
  return p;
}

template <class T>
std::size_t Parameters<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.data.size();
  return n;
}

template <class T>
void Parameters<T>::zero() {
  for (auto& t : tensors_) std::fill(t.data.begin(), t.data.end(), T(0));
}

template <class T>
bool Parameters<T>::all_finite() const {
  for (const auto& t : tensors_) {
    for (T v : t.data) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

template <class T>
template <class U>
Parameters<U> Parameters<T>::cast() const {
  Parameters<U> out(config_);
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    std::transform(tensors_[i].data.begin(), tensors_[i].data.end(), out.tensors()[i].data.begin(),
                   [](T v) { return static_cast<U>(v); });
  }
  return out;
}

// ---------------------------------------------------------------------------
// batching

Batch make_batch(std::span<const TokenSeq> sequences) {
  Batch b;
  b.batch = static_cast<int>(sequences.size());
  for (const TokenSeq& s : sequences) b.seq = std::max(b.seq, static_cast<int>(s.size()) - 1);
  const std::size_t cells = static_cast<std::size_t>(b.batch) * static_cast<std::size_t>(b.seq);
  b.inputs.assign(cells, Vocabulary::kPad);
  b.targets.assign(cells, Vocabulary::kPad);
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const TokenSeq& s = sequences[i];
    for (std::size_t t = 0; t + 1 < s.size(); ++t) {
      b.inputs[i * static_cast<std::size_t>(b.seq) + t] = s[t];
      b.targets[i * static_cast<std::size_t>(b.seq) + t] = s[t + 1];
    }
  }
  return b;
}

template <class T>
double nll_loss(std::span<const T> logits, std::span<const int> targets, int vocab, int ignore) {
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    if (targets[r] == ignore) continue;
    const T* z = logits.data() + r * static_cast<std::size_t>(vocab);
    double maxv = z[0];
    for (int j = 1; j < vocab; ++j) maxv = std::max(maxv, static_cast<double>(z[j]));
    double denom = 0.0;
    for (int j = 0; j < vocab; ++j) denom += std::exp(static_cast<double>(z[j]) - maxv);
    total += maxv + std::log(denom) - static_cast<double>(z[targets[r]]);
    ++counted;
  }
  if (counted == 0) throw Error(ErrorCode::AllPadded, "every target position is padding");
  return total / static_cast<double>(counted);
}

// ---------------------------------------------------------------------------
// training forward / backward

template <class T>
struct LayerActivations {
  std::vector<T> x_in, ln1, mean1, rstd1, qkv, probs, att, drop1, x_mid, ln2, mean2, rstd2, fc_pre, fc_act, drop2;
};

template <class T>
struct Workspace {
  int rows = 0;
  int batch = 0;
  int seq = 0;
  std::vector<int> inputs;
  std::vector<int> targets;
  std::vector<T> drop0;
  std::vector<LayerActivations<T>> layers;
  std::vector<T> x_final, lnf, meanf, rstdf, logits, row_loss;
  // backward scratch
  std::vector<T> dx, dtmp, dwide, dqkv, datt;
  bool dropout_active = false;
};

namespace {

template <class T>
void resize(std::vector<T>& v, std::size_t n) {
  if (v.size() != n) v.assign(n, T(0));
}

template <class T>
void make_mask(std::vector<T>& mask, std::size_t n, double p, std::mt19937_64& rng) {
  mask.resize(n);
  std::bernoulli_distribution keep(1.0 - p);
  const T scale = static_cast<T>(1.0 / (1.0 - p));
  for (T& m : mask) m = keep(rng) ? scale : T(0);
}

template <class T>
void apply_mask(std::vector<T>& v, const std::vector<T>& mask) {
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= mask[i];
}

}  // namespace

template <class T>
Model<T>::Model(Parameters<T> params) : params_(std::move(params)), ws_(std::make_unique<Workspace<T>>()) {}

template <class T>
Model<T>::~Model() = default;
template <class T>
Model<T>::Model(Model&&) noexcept = default;
template <class T>
Model<T>& Model<T>::operator=(Model&&) noexcept = default;

template <class T>
T Model<T>::run_forward(const Batch& batch, std::mt19937_64* rng) {
  const ModelConfig& cfg = params_.config();
  if (batch.seq > cfg.context) {
    throw Error(ErrorCode::SequenceTooLong, "sequence length " + std::to_string(batch.seq) +
                                                " exceeds context " + std::to_string(cfg.context));
  }
  Workspace<T>& ws = *ws_;
  const int d = cfg.embed_dim;
  const int V = cfg.vocab_size;
  const int rows = batch.batch * batch.seq;
  const auto R = static_cast<std::size_t>(rows);
  const auto D = static_cast<std::size_t>(d);
  ws.rows = rows;
  ws.batch = batch.batch;
  ws.seq = batch.seq;
  ws.inputs = batch.inputs;
  ws.targets = batch.targets;
  ws.dropout_active = rng != nullptr && cfg.dropout > 0.0;
  ws.layers.resize(static_cast<std::size_t>(cfg.layers));

  const kernels::AttentionShape shape{batch.batch, batch.seq, cfg.heads, cfg.head_dim()};

  // embeddings
  std::vector<T>& x0 = ws.layers[0].x_in;
  resize(x0, R * D);
  const auto& wte = params_.token_embedding().data;
  const auto& wpe = params_.position_embedding().data;
  for (int r = 0; r < rows; ++r) {
    const int tok = batch.inputs[static_cast<std::size_t>(r)];
    if (tok < 0 || tok >= V) throw Error(ErrorCode::IdOutOfRange, "token id " + std::to_string(tok) + " out of range");
    const int pos = r % batch.seq;
    for (int j = 0; j < d; ++j) {
      x0[static_cast<std::size_t>(r) * D + static_cast<std::size_t>(j)] =
          wte[static_cast<std::size_t>(tok) * D + static_cast<std::size_t>(j)] +
          wpe[static_cast<std::size_t>(pos) * D + static_cast<std::size_t>(j)];
    }
  }
  if (ws.dropout_active) {
    make_mask(ws.drop0, R * D, cfg.dropout, *rng);
    apply_mask(x0, ws.drop0);
  }

  for (int l = 0; l < cfg.layers; ++l) {
    LayerActivations<T>& a = ws.layers[static_cast<std::size_t>(l)];
    auto P = [&](LayerTensor t) { return std::span<const T>(params_.layer(l, t).data); };
    resize(a.ln1, R * D);
    resize(a.mean1, R);
    resize(a.rstd1, R);
    k::layernorm_forward<T>(a.x_in, P(LayerTensor::Ln1Gain), P(LayerTensor::Ln1Bias), a.ln1, a.mean1, a.rstd1, rows, d);
    resize(a.qkv, R * 3 * D);
    k::matmul<T>(a.ln1, P(LayerTensor::QkvWeight), a.qkv, rows, d, 3 * d, false);
    k::add_bias<T>(a.qkv, P(LayerTensor::QkvBias), rows, 3 * d);
    resize(a.probs, static_cast<std::size_t>(batch.batch) * cfg.heads * batch.seq * batch.seq);
    resize(a.att, R * D);
    k::attention_forward<T>(a.qkv, a.probs, a.att, shape);

    resize(a.x_mid, R * D);
    k::matmul<T>(a.att, P(LayerTensor::ProjWeight), a.x_mid, rows, d, d, false);
    k::add_bias<T>(a.x_mid, P(LayerTensor::ProjBias), rows, d);
    if (ws.dropout_active) {
      make_mask(a.drop1, R * D, cfg.dropout, *rng);
      apply_mask(a.x_mid, a.drop1);
    }
    for (std::size_t i = 0; i < R * D; ++i) a.x_mid[i] += a.x_in[i];

    resize(a.ln2, R * D);
    resize(a.mean2, R);
    resize(a.rstd2, R);
    k::layernorm_forward<T>(a.x_mid, P(LayerTensor::Ln2Gain), P(LayerTensor::Ln2Bias), a.ln2, a.mean2, a.rstd2, rows, d);
    resize(a.fc_pre, R * 4 * D);
    resize(a.fc_act, R * 4 * D);
    k::matmul<T>(a.ln2, P(LayerTensor::FcWeight), a.fc_pre, rows, d, 4 * d, false);
    k::add_bias<T>(a.fc_pre, P(LayerTensor::FcBias), rows, 4 * d);
    k::gelu_forward<T>(a.fc_pre, a.fc_act);

    std::vector<T>& next = l + 1 < cfg.layers ? ws.layers[static_cast<std::size_t>(l) + 1].x_in : ws.x_final;
    resize(next, R * D);
    k::matmul<T>(a.fc_act, P(LayerTensor::OutWeight), next, rows, 4 * d, d, false);
    k::add_bias<T>(next, P(LayerTensor::OutBias), rows, d);
    if (ws.dropout_active) {
      make_mask(a.drop2, R * D, cfg.dropout, *rng);
      apply_mask(next, a.drop2);
    }
    for (std::size_t i = 0; i < R * D; ++i) next[i] += a.x_mid[i];
  }

  resize(ws.lnf, R * D);
  resize(ws.meanf, R);
  resize(ws.rstdf, R);
  k::layernorm_forward<T>(ws.x_final, params_.final_gain().data, params_.final_bias().data, ws.lnf, ws.meanf,
                          ws.rstdf, rows, d);
  resize(ws.logits, R * static_cast<std::size_t>(V));
  k::matmul_bt<T>(ws.lnf, wte, ws.logits, rows, d, V, false);

  const auto valid = static_cast<std::size_t>(
      std::count_if(batch.targets.begin(), batch.targets.end(), [](int t) { return t != Vocabulary::kPad; }));
  if (valid == 0) throw Error(ErrorCode::AllPadded, "every target position is padding");
  resize(ws.row_loss, R);
  // softmax_xent overwrites logits with their gradient; loss is read from row_loss.
  k::softmax_xent<T>(ws.logits, batch.targets, Vocabulary::kPad, T(1) / static_cast<T>(valid), ws.row_loss,
                     ws.logits, rows, V);
  double total = 0.0;
  for (T v : ws.row_loss) total += static_cast<double>(v);
  return static_cast<T>(total / static_cast<double>(valid));
}

template <class T>
T Model<T>::loss(const Batch& batch) {
  return run_forward(batch, nullptr);
}

template <class T>
T Model<T>::loss_and_gradients(const Batch& batch, Parameters<T>& grads, std::mt19937_64* dropout_rng) {
  const T loss_value = run_forward(batch, dropout_rng);
  Workspace<T>& ws = *ws_;
  const ModelConfig& cfg = params_.config();
  const int d = cfg.embed_dim;
  const int V = cfg.vocab_size;
  const int rows = ws.rows;
  const auto R = static_cast<std::size_t>(rows);
  const auto D = static_cast<std::size_t>(d);
  const kernels::AttentionShape shape{ws.batch, ws.seq, cfg.heads, cfg.head_dim()};
  grads.zero();

  const std::vector<T>& dlogits = ws.logits;
  auto& wte = params_.token_embedding().data;
  k::matmul_at<T>(dlogits, ws.lnf, grads.token_embedding().data, rows, V, d, true);
  resize(ws.dtmp, R * D);
  k::matmul<T>(dlogits, wte, ws.dtmp, rows, V, d, false);
  resize(ws.dx, R * D);
  k::layernorm_backward<T>(ws.dtmp, ws.x_final, params_.final_gain().data, ws.meanf, ws.rstdf, ws.dx,
                           grads.final_gain().data, grads.final_bias().data, rows, d);

  for (int l = cfg.layers - 1; l >= 0; --l) {
    LayerActivations<T>& a = ws.layers[static_cast<std::size_t>(l)];
    auto P = [&](LayerTensor t) { return std::span<const T>(params_.layer(l, t).data); };
    auto G = [&](LayerTensor t) { return std::span<T>(grads.layer(l, t).data); };

    // MLP branch: dx is d(loss)/d(layer output)
    resize(ws.datt, R * D);
    std::copy(ws.dx.begin(), ws.dx.end(), ws.datt.begin());
    if (ws.dropout_active) apply_mask(ws.datt, a.drop2);
    k::matmul_at<T>(a.fc_act, ws.datt, G(LayerTensor::OutWeight), rows, 4 * d, d, true);
    k::column_sums<T>(ws.datt, G(LayerTensor::OutBias), rows, d);
    resize(ws.dwide, R * 4 * D);
    k::matmul_bt<T>(ws.datt, P(LayerTensor::OutWeight), ws.dwide, rows, d, 4 * d, false);
    k::gelu_backward<T>(ws.dwide, a.fc_pre, ws.dwide);
    k::matmul_at<T>(a.ln2, ws.dwide, G(LayerTensor::FcWeight), rows, d, 4 * d, true);
    k::column_sums<T>(ws.dwide, G(LayerTensor::FcBias), rows, 4 * d);
    k::matmul_bt<T>(ws.dwide, P(LayerTensor::FcWeight), ws.dtmp, rows, 4 * d, d, false);
    k::layernorm_backward<T>(ws.dtmp, a.x_mid, P(LayerTensor::Ln2Gain), a.mean2, a.rstd2, ws.datt,
                             G(LayerTensor::Ln2Gain), G(LayerTensor::Ln2Bias), rows, d);
    for (std::size_t i = 0; i < R * D; ++i) ws.dx[i] += ws.datt[i];  // dx = d/d(x_mid)

    // attention branch
    std::copy(ws.dx.begin(), ws.dx.end(), ws.datt.begin());
    if (ws.dropout_active) apply_mask(ws.datt, a.drop1);
    k::matmul_at<T>(a.att, ws.datt, G(LayerTensor::ProjWeight), rows, d, d, true);
    k::column_sums<T>(ws.datt, G(LayerTensor::ProjBias), rows, d);
    k::matmul_bt<T>(ws.datt, P(LayerTensor::ProjWeight), ws.dtmp, rows, d, d, false);
    resize(ws.dqkv, R * 3 * D);
    k::attention_backward<T>(ws.dtmp, a.qkv, a.probs, ws.dqkv, shape);
    k::matmul_at<T>(a.ln1, ws.dqkv, G(LayerTensor::QkvWeight), rows, d, 3 * d, true);
    k::column_sums<T>(ws.dqkv, G(LayerTensor::QkvBias), rows, 3 * d);
    k::matmul_bt<T>(ws.dqkv, P(LayerTensor::QkvWeight), ws.dtmp, rows, 3 * d, d, false);
    k::layernorm_backward<T>(ws.dtmp, a.x_in, P(LayerTensor::Ln1Gain), a.mean1, a.rstd1, ws.datt,
                             G(LayerTensor::Ln1Gain), G(LayerTensor::Ln1Bias), rows, d);
    for (std::size_t i = 0; i < R * D; ++i) ws.dx[i] += ws.datt[i];  // dx = d/d(x_in)
  }

  if (ws.dropout_active) apply_mask(ws.dx, ws.drop0);
  auto& gte = grads.token_embedding().data;
  auto& gpe = grads.position_embedding().data;
  for (int r = 0; r < rows; ++r) {
    const auto tok = static_cast<std::size_t>(ws.inputs[static_cast<std::size_t>(r)]);
    const auto pos = static_cast<std::size_t>(r % ws.seq);
    for (std::size_t j = 0; j < D; ++j) {
      const T g = ws.dx[static_cast<std::size_t>(r) * D + j];
      gte[tok * D + j] += g;
      gpe[pos * D + j] += g;
    }
  }
  return loss_value;
}

// ---------------------------------------------------------------------------
// plain forward

template <class T>
std::vector<T> forward(const Parameters<T>& params, std::span<const int> tokens, int batch, int seq) {
  const ModelConfig& cfg = params.config();
  if (seq > cfg.context) {
    throw Error(ErrorCode::SequenceTooLong, "sequence length " + std::to_string(seq) + " exceeds context " +
                                                std::to_string(cfg.context));
  }
  const int d = cfg.embed_dim;
  const int V = cfg.vocab_size;
  const int rows = batch * seq;
  const auto R = static_cast<std::size_t>(rows);
  const auto D = static_cast<std::size_t>(d);
  const kernels::AttentionShape shape{batch, seq, cfg.heads, cfg.head_dim()};

  std::vector<T> x(R * D), ln(R * D), mean(R), rstd(R), qkv(R * 3 * D), att(R * D), tmp(R * D);
  std::vector<T> probs(static_cast<std::size_t>(batch) * cfg.heads * seq * seq), wide(R * 4 * D), act(R * 4 * D);
  const auto& wte = params.token_embedding().data;
  const auto& wpe = params.position_embedding().data;
  for (int r = 0; r < rows; ++r) {
    const int tok = tokens[static_cast<std::size_t>(r)];
    if (tok < 0 || tok >= V) throw Error(ErrorCode::IdOutOfRange, "token id " + std::to_string(tok) + " out of range");
    const auto pos = static_cast<std::size_t>(r % seq);
    for (std::size_t j = 0; j < D; ++j) {
      x[static_cast<std::size_t>(r) * D + j] = wte[static_cast<std::size_t>(tok) * D + j] + wpe[pos * D + j];
    }
  }
  for (int l = 0; l < cfg.layers; ++l) {
    auto P = [&](LayerTensor t) { return std::span<const T>(params.layer(l, t).data); };
    k::layernorm_forward<T>(x, P(LayerTensor::Ln1Gain), P(LayerTensor::Ln1Bias), ln, mean, rstd, rows, d);
    k::matmul<T>(ln, P(LayerTensor::QkvWeight), qkv, rows, d, 3 * d, false);
    k::add_bias<T>(qkv, P(LayerTensor::QkvBias), rows, 3 * d);
    k::attention_forward<T>(qkv, probs, att, shape);
    k::matmul<T>(att, P(LayerTensor::ProjWeight), tmp, rows, d, d, false);
    k::add_bias<T>(tmp, P(LayerTensor::ProjBias), rows, d);
    for (std::size_t i = 0; i < R * D; ++i) x[i] += tmp[i];
    k::layernorm_forward<T>(x, P(LayerTensor::Ln2Gain), P(LayerTensor::Ln2Bias), ln, mean, rstd, rows, d);
    k::matmul<T>(ln, P(LayerTensor::FcWeight), wide, rows, d, 4 * d, false);
    k::add_bias<T>(wide, P(LayerTensor::FcBias), rows, 4 * d);
    k::gelu_forward<T>(wide, act);
    k::matmul<T>(act, P(LayerTensor::OutWeight), tmp, rows, 4 * d, d, false);
    k::add_bias<T>(tmp, P(LayerTensor::OutBias), rows, d);
    for (std::size_t i = 0; i < R * D; ++i) x[i] += tmp[i];
  }
  k::layernorm_forward<T>(x, params.final_gain().data, params.final_bias().data, ln, mean, rstd, rows, d);
  std::vector<T> logits(R * static_cast<std::size_t>(V));
  k::matmul_bt<T>(ln, wte, logits, rows, d, V, false);
  return logits;
}

// ---------------------------------------------------------------------------
// incremental decoding

template <class T>
DecodeSession<T>::DecodeSession(const Parameters<T>& params) : params_(&params) {
  const ModelConfig& cfg = params.config();
  const auto D = static_cast<std::size_t>(cfg.embed_dim);
  const auto V = static_cast<std::size_t>(cfg.vocab_size);
  embedding_t_.resize(D * V);
  const auto& wte = params.token_embedding().data;
  for (std::size_t v = 0; v < V; ++v) {
    for (std::size_t j = 0; j < D; ++j) embedding_t_[j * V + v] = wte[v * D + j];
  }
  keys_.assign(static_cast<std::size_t>(cfg.layers), std::vector<T>(static_cast<std::size_t>(cfg.context) * D));
  values_ = keys_;
  x_.resize(D);
  a_.resize(D);
  qkv_.resize(3 * D);
  att_.resize(D);
  tmp_.resize(D);
  hidden_.resize(4 * D);
  act_.resize(4 * D);
  logits_.resize(V);
  scores_.resize(static_cast<std::size_t>(cfg.context));
  mean_.resize(1);
  rstd_.resize(1);
}

template <class T>
void DecodeSession<T>::reset() {
  length_ = 0;
}

template <class T>
std::span<const T> DecodeSession<T>::push(int token) {
  const Parameters<T>& p = *params_;
  const ModelConfig& cfg = p.config();
  if (length_ >= cfg.context) {
    throw Error(ErrorCode::SequenceTooLong, "decode session exceeded context " + std::to_string(cfg.context));
  }
  if (token < 0 || token >= cfg.vocab_size) {
    throw Error(ErrorCode::IdOutOfRange, "token id " + std::to_string(token) + " out of range");
  }
  const int d = cfg.embed_dim;
  const int hd = cfg.head_dim();
  const auto D = static_cast<std::size_t>(d);
  const int pos = length_;
  const auto& wte = p.token_embedding().data;
  const auto& wpe = p.position_embedding().data;
  for (std::size_t j = 0; j < D; ++j) {
    x_[j] = wte[static_cast<std::size_t>(token) * D + j] + wpe[static_cast<std::size_t>(pos) * D + j];
  }
  const T scale = T(1) / std::sqrt(T(hd));
  for (int l = 0; l < cfg.layers; ++l) {
    auto P = [&](LayerTensor t) { return std::span<const T>(p.layer(l, t).data); };
    k::layernorm_forward<T>(x_, P(LayerTensor::Ln1Gain), P(LayerTensor::Ln1Bias), a_, mean_, rstd_, 1, d);
    k::matmul<T>(a_, P(LayerTensor::QkvWeight), qkv_, 1, d, 3 * d, false);
    k::add_bias<T>(qkv_, P(LayerTensor::QkvBias), 1, 3 * d);
    std::vector<T>& kc = keys_[static_cast<std::size_t>(l)];
    std::vector<T>& vc = values_[static_cast<std::size_t>(l)];
    std::copy_n(qkv_.begin() + d, d, kc.begin() + static_cast<std::ptrdiff_t>(pos) * d);
    std::copy_n(qkv_.begin() + 2 * d, d, vc.begin() + static_cast<std::ptrdiff_t>(pos) * d);
    for (int h = 0; h < cfg.heads; ++h) {
      const T* q = qkv_.data() + h * hd;
      T maxv = -std::numeric_limits<T>::infinity();
      for (int j = 0; j <= pos; ++j) {
        const T* kk = kc.data() + static_cast<std::size_t>(j) * D + static_cast<std::size_t>(h * hd);
        T dot = 0;
        for (int e = 0; e < hd; ++e) dot += q[e] * kk[e];
        scores_[static_cast<std::size_t>(j)] = dot * scale;
        maxv = std::max(maxv, dot * scale);
      }
      T denom = 0;
      for (int j = 0; j <= pos; ++j) {
        scores_[static_cast<std::size_t>(j)] = std::exp(scores_[static_cast<std::size_t>(j)] - maxv);
        denom += scores_[static_cast<std::size_t>(j)];
      }
      T* o = att_.data() + h * hd;
      std::fill(o, o + hd, T(0));
      for (int j = 0; j <= pos; ++j) {
        const T w = scores_[static_cast<std::size_t>(j)] / denom;
        const T* v = vc.data() + static_cast<std::size_t>(j) * D + static_cast<std::size_t>(h * hd);
        for (int e = 0; e < hd; ++e) o[e] += w * v[e];
      }
    }
    k::matmul<T>(att_, P(LayerTensor::ProjWeight), tmp_, 1, d, d, false);
    k::add_bias<T>(tmp_, P(LayerTensor::ProjBias), 1, d);
    for (std::size_t j = 0; j < D; ++j) x_[j] += tmp_[j];
    k::layernorm_forward<T>(x_, P(LayerTensor::Ln2Gain), P(LayerTensor::Ln2Bias), a_, mean_, rstd_, 1, d);
    k::matmul<T>(a_, P(LayerTensor::FcWeight), hidden_, 1, d, 4 * d, false);
    k::add_bias<T>(hidden_, P(LayerTensor::FcBias), 1, 4 * d);
    k::gelu_forward<T>(hidden_, act_);
    k::matmul<T>(act_, P(LayerTensor::OutWeight), tmp_, 1, 4 * d, d, false);
    k::add_bias<T>(tmp_, P(LayerTensor::OutBias), 1, d);
    for (std::size_t j = 0; j < D; ++j) x_[j] += tmp_[j];
  }
  k::layernorm_forward<T>(x_, p.final_gain().data, p.final_bias().data, a_, mean_, rstd_, 1, d);
  k::matmul<T>(a_, embedding_t_, logits_, 1, d, cfg.vocab_size, false);
  ++length_;
  return logits_;
}

template class Parameters<float>;
template class Parameters<double>;
template Parameters<double> Parameters<float>::cast<double>() const;
template Parameters<float> Parameters<double>::cast<float>() const;
template class Model<float>;
template class Model<double>;
template class DecodeSession<float>;
template class DecodeSession<double>;
template std::vector<float> forward<float>(const Parameters<float>&, std::span<const int>, int, int);
template std::vector<double> forward<double>(const Parameters<double>&, std::span<const int>, int, int);
template double nll_loss<float>(std::span<const float>, std::span<const int>, int, int);
template double nll_loss<double>(std::span<const double>, std::span<const int>, int, int);

}  // namespace layoutprior
