#include "layoutprior/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "layoutprior/error.hpp"
#include "layoutprior/grammar.hpp"

namespace layoutprior {

using nlohmann::json;

void SampleOptions::validate() const {
  auto bad = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, "sample options: " + why); };
  if (!(temperature > 0.0)) bad("temperature must be positive");
  if (top_k < 0) bad("top_k must be non-negative");
  if (top_p && !(*top_p > 0.0 && *top_p <= 1.0)) bad("top_p must be in (0, 1]");
  if (max_tokens < 2) bad("max_tokens must be at least 2");
}

namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int choose(std::span<const float> logits, std::vector<int>& candidates, const SampleOptions& opt,
           std::mt19937_64& rng) {
  if (opt.greedy) {
    int best = candidates.front();
    for (int c : candidates) {
      if (logits[static_cast<std::size_t>(c)] > logits[static_cast<std::size_t>(best)]) best = c;
    }
    return best;
  }
  std::stable_sort(candidates.begin(), candidates.end(), [&](int a, int b) {
    return logits[static_cast<std::size_t>(a)] > logits[static_cast<std::size_t>(b)];
  });
  std::size_t keep = candidates.size();
  if (opt.top_k > 0) keep = std::min(keep, static_cast<std::size_t>(opt.top_k));
  const double top = logits[static_cast<std::size_t>(candidates.front())];
  std::vector<double> weights(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    weights[i] = std::exp((static_cast<double>(logits[static_cast<std::size_t>(candidates[i])]) - top) / opt.temperature);
  }
  if (opt.top_p) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    double mass = 0.0;
    std::size_t cut = 0;
    while (cut < keep) {
      mass += weights[cut++];
      if (mass >= *opt.top_p * total) break;
    }
    keep = cut;
    weights.resize(keep);
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  const double target = uniform01(rng) * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < keep; ++i) {
    acc += weights[i];
    if (target < acc) return candidates[i];
  }
  return candidates[keep - 1];
}

TokenSeq encode_prompt(const std::string& prompt, const Vocabulary& vocab) {
  const EncodeResult enc = encode_symbols(prompt, vocab);
  if (enc.unk_count > 0) {
    throw Error(ErrorCode::IllegalPromptPrefix,
                "prompt contains " + std::to_string(enc.unk_count) + " word(s) outside the vocabulary");
  }
  TokenSeq ids{Vocabulary::kBos};
  ids.insert(ids.end(), enc.ids.begin(), enc.ids.end());
  return ids;
}

ConstraintOptions constraint_options(const SampleOptions& opt) {
  ConstraintOptions c;
  c.max_symbols = opt.max_tokens - 1;
  c.categories = opt.categories;
  return c;
}

GrammarState consume_prompt(const TokenGrammar& grammar, const TokenSeq& ids, const Vocabulary& vocab,
                            const SampleOptions& opt) {
  const auto body = std::span<const int>(ids).subspan(1);
  try {
    return grammar.consume(grammar.init_state(), body);
  } catch (const Error& e) {
    // A prefix that only fails under the token budget is a length problem.
    ConstraintOptions unbounded = constraint_options(opt);
    unbounded.max_symbols = std::numeric_limits<int>::max() / 4;
    const TokenGrammar loose(vocab, unbounded);
    bool legal = true;
    try {
      loose.consume(loose.init_state(), body);
    } catch (const Error&) {
      legal = false;
    }
    if (legal) {
      throw Error(ErrorCode::ContextOverflow, "prompt cannot be completed within " + std::to_string(opt.max_tokens) +
                                                  " tokens");
    }
    throw Error(ErrorCode::IllegalPromptPrefix, std::string("prompt is not a legal prefix: ") + e.what());
  }
}

SampleResult run(const Parameters<float>& params, const Vocabulary& vocab, TokenSeq ids, const SampleOptions& opt,
                 const TokenGrammar* grammar, GrammarState state) {
  if (opt.max_tokens > params.config().context) {
    throw Error(ErrorCode::ContextOverflow, "max_tokens " + std::to_string(opt.max_tokens) +
                                                " exceeds the context window " + std::to_string(params.config().context));
  }
  if (params.config().vocab_size != vocab.size()) {
    throw Error(ErrorCode::VersionMismatch, "model vocab size " + std::to_string(params.config().vocab_size) +
                                                " differs from vocabulary size " + std::to_string(vocab.size()));
  }
  if (static_cast<int>(ids.size()) >= opt.max_tokens) {
    throw Error(ErrorCode::ContextOverflow, "prompt uses " + std::to_string(ids.size()) + " of " +
                                                std::to_string(opt.max_tokens) + " tokens");
  }
  if (grammar && state.emitted + grammar->min_completion(state) > opt.max_tokens - 1) {
    throw Error(ErrorCode::ContextOverflow, "prompt cannot be completed within " + std::to_string(opt.max_tokens) + " tokens");
  }

  std::mt19937_64 rng(opt.seed);
  DecodeSession<float> session(params);
  std::span<const float> logits;
  for (int t : ids) logits = session.push(t);

  SampleResult out;
  std::vector<int> candidates;
  while (static_cast<int>(ids.size()) < opt.max_tokens) {
    if (grammar) {
      candidates = grammar->next_allowed_tokens(state);
    } else {
      candidates.clear();
      for (int t = 0; t < vocab.size(); ++t) {
        if (t != Vocabulary::kBos && t != Vocabulary::kPad && t != Vocabulary::kUnk) candidates.push_back(t);
      }
    }
    const int tok = choose(logits, candidates, opt, rng);
    ids.push_back(tok);
    if (grammar) state = grammar->advance(state, tok);
    if (tok == Vocabulary::kEos) {
      out.terminated = true;
      break;
    }
    if (static_cast<int>(ids.size()) < opt.max_tokens) logits = session.push(tok);
  }
  out.text = decode(ids, vocab);
  out.ids = std::move(ids);
  return out;
}

}  // namespace

SampleResult sample(const Parameters<float>& params, const Vocabulary& vocab, const std::string& prompt,
                    const SampleOptions& options) {
  options.validate();
  TokenSeq ids = encode_prompt(prompt, vocab);
  if (!options.constrained) return run(params, vocab, std::move(ids), options, nullptr, {});
  const TokenGrammar grammar(vocab, constraint_options(options));
  const GrammarState state = consume_prompt(grammar, ids, vocab, options);
  return run(params, vocab, std::move(ids), options, &grammar, state);
}

SampleResult continue_scene(const Parameters<float>& params, const Vocabulary& vocab, const std::string& partial,
                            const SampleOptions& options) {
  options.validate();
  TokenSeq ids = encode_prompt(partial, vocab);
  const TokenGrammar grammar(vocab, constraint_options(options));
  const GrammarState state = consume_prompt(grammar, ids, vocab, options);
  if (state.templ != TemplateChoice::B || state.groups == 0) {
    throw Error(ErrorCode::IllegalPromptPrefix, "continuation needs a template-b prefix with at least one group");
  }
  if (state.phase == Phase::End) {
    throw Error(ErrorCode::DeclaredCountExhausted, "prefix already holds all " + std::to_string(state.declared) +
                                                       " declared instances");
  }
  if (state.phase != Phase::GroupOpen) {
    throw Error(ErrorCode::IllegalPromptPrefix, "continuation prefix must end right after a closed group");
  }
  if (!options.constrained) return run(params, vocab, std::move(ids), options, nullptr, {});
  return run(params, vocab, std::move(ids), options, &grammar, state);
}

PromptGenerator::PromptGenerator(std::vector<std::string> categories, std::uint64_t seed, int min_instances,
                                 int max_instances)
    : categories_(std::move(categories)), rng_(seed), min_instances_(min_instances), max_instances_(max_instances) {
  if (categories_.empty()) throw Error(ErrorCode::InvalidConfig, "prompt generator needs at least one category");
  if (min_instances < 2 || max_instances < min_instances) {
    throw Error(ErrorCode::InvalidConfig, "prompt instance range must satisfy 2 <= min <= max");
  }
}

PromptRequest PromptGenerator::next() {
  PromptRequest r;
  r.size = static_cast<SizeFlag>(rng_() % 3);
  r.instances = min_instances_ + static_cast<int>(rng_() % static_cast<std::uint64_t>(max_instances_ - min_instances_ + 1));
  r.category = categories_[cursor_++ % categories_.size()];
  r.prompt = make_prompt(r);
  return r;
}

PromptRequest request_from_prompt(const std::string& prompt) {
  PromptRequest r;
  r.prompt = prompt;
  std::vector<std::string> fields;
  std::string cur;
  for (char c : prompt) {
    if (c == ';') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  const std::size_t complete = fields.size() - 1;  // fields followed by ';'
  if (complete >= 1) {
    if (auto t = parse_annotation_type(trim(fields[0]))) r.annotation_type = *t;
  }
  if (complete >= 2) {
    if (auto d = parse_data_type(trim(fields[1]))) r.data_type = *d;
  }
  if (complete >= 3) r.size = parse_size_flag(trim(fields[2]));
  if (complete >= 4) {
    if (auto n = parse_coordinate(trim(fields[3]))) r.instances = *n;
  }
  if (complete >= 5 && fields.size() > 5) {
    const std::string rest = trim(fields[5]);
    r.category = trim(rest.substr(0, rest.find(',')));
  }
  return r;
}

std::string make_prompt(const PromptRequest& r) {
  std::string out;
  out += to_string(r.annotation_type);
  out += "; ";
  out += to_string(r.data_type);
  out += "; ";
  out += to_string(r.size.value_or(SizeFlag::Small));
  out += "; " + std::to_string(r.instances.value_or(2)) + "; ";
  out += r.annotation_type == AnnotationType::Keypoint ? "18" : "0";
  out += "; " + r.category + ",";
  return out;
}

std::vector<BatchSample> batch_sample(const Parameters<float>& params, const Vocabulary& vocab,
                                      const std::vector<PromptRequest>& requests, const SampleOptions& options) {
  if (requests.empty()) throw Error(ErrorCode::InvalidConfig, "batch_sample needs at least one request");
  std::vector<BatchSample> out(requests.size());
  std::vector<std::exception_ptr> errors(requests.size());
  const auto n = static_cast<std::ptrdiff_t>(requests.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    try {
      out[idx].request = requests[idx];
      out[idx].options = options;
      out[idx].options.seed = options.seed + static_cast<std::uint64_t>(i);
      out[idx].result = sample(params, vocab, requests[idx].prompt, out[idx].options);
    } catch (...) {
      errors[idx] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::string sidecar_line(const BatchSample& s, std::size_t index) {
  json j;
  j["index"] = index;
  j["prompt"] = s.request.prompt;
  j["annotation_type"] = to_string(s.request.annotation_type);
  j["data_type"] = to_string(s.request.data_type);
  j["size"] = s.request.size ? json(to_string(*s.request.size)) : json(nullptr);
  j["instances"] = s.request.instances ? json(*s.request.instances) : json(nullptr);
  j["category"] = s.request.category;
  j["temperature"] = s.options.temperature;
  j["top_k"] = s.options.top_k;
  j["top_p"] = s.options.top_p ? json(*s.options.top_p) : json(nullptr);
  j["greedy"] = s.options.greedy;
  j["constrained"] = s.options.constrained;
  j["max_tokens"] = s.options.max_tokens;
  j["seed"] = s.options.seed;
  j["terminated"] = s.result.terminated;
  return j.dump();
}

PromptRequest parse_sidecar_line(const std::string& line) {
  try {
    const json j = json::parse(line);
    PromptRequest r;
    r.prompt = j.at("prompt").get<std::string>();
    const auto type = parse_annotation_type(j.at("annotation_type").get<std::string>());
    const auto data = parse_data_type(j.at("data_type").get<std::string>());
    if (!type || !data) throw Error(ErrorCode::MalformedFile, "sidecar line has an unknown flag value");
    r.annotation_type = *type;
    r.data_type = *data;
    if (!j.at("size").is_null()) {
      r.size = parse_size_flag(j["size"].get<std::string>());
      if (!r.size) throw Error(ErrorCode::MalformedFile, "sidecar line has an unknown size flag");
    }
    if (!j.at("instances").is_null()) r.instances = j["instances"].get<int>();
    r.category = j.value("category", std::string{});
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedFile, std::string("sidecar line: ") + e.what());
  }
}

}  // namespace layoutprior
