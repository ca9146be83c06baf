#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "layoutprior/constraint.hpp"
#include "layoutprior/model.hpp"
#include "layoutprior/scene.hpp"
#include "layoutprior/tokenizer.hpp"

namespace layoutprior {

struct SampleOptions {
  double temperature = 1.0;
  int top_k = 40;                     // 0 = off
  std::optional<double> top_p;        // nucleus mass in (0, 1]
  bool greedy = false;                // argmax; ignores temperature/top_k/top_p
  int max_tokens = 256;               // total length incl. BOS and EOS, at most the context window
  bool constrained = false;
  std::uint64_t seed = 0;
  /// Constrained mode only: restrict category positions to these names.
  std::optional<std::vector<std::string>> categories;

  void validate() const;  // throws InvalidConfig
};

struct SampleResult {
  std::string text;      // prompt + continuation, canonical spacing
  TokenSeq ids;          // BOS .. EOS (or truncated)
  bool terminated = false;  // EOS produced within max_tokens
};

/// Autoregressive continuation of `prompt`. Throws IllegalPromptPrefix
/// (constrained mode, or a prompt with unknown words), ContextOverflow.
SampleResult sample(const Parameters<float>& params, const Vocabulary& vocab, const std::string& prompt,
                    const SampleOptions& options);

/// Extends a template-b prefix that ends right after a closed group until
/// the declared instance count is reached. Throws IllegalPromptPrefix,
/// DeclaredCountExhausted.
SampleResult continue_scene(const Parameters<float>& params, const Vocabulary& vocab, const std::string& partial,
                            const SampleOptions& options);

/// Flags requested by one prompt; stored in the sampling sidecar.
struct PromptRequest {
  std::string prompt;
  AnnotationType annotation_type = AnnotationType::Box;
  DataType data_type = DataType::MultipleInstances;
  std::optional<SizeFlag> size;  // unset when the prompt stops before the field
  std::optional<int> instances;
  std::string category;
};

/// Recovers requested flags from the leading fields of a prompt.
PromptRequest request_from_prompt(const std::string& prompt);

/// Evaluation prompts: "box; multiple instances; <size>; <n>; 0; <category>,"
/// with size uniform over small/medium/large and n uniform in [min, max].
/// Categories are visited round-robin so each leads at least
/// ceil(count / #categories) prompts.
class PromptGenerator {
 public:
  PromptGenerator(std::vector<std::string> categories, std::uint64_t seed, int min_instances = 2,
                  int max_instances = 10);

  PromptRequest next();
  const std::vector<std::string>& categories() const { return categories_; }

 private:
  std::vector<std::string> categories_;
  std::mt19937_64 rng_;
  int min_instances_;
  int max_instances_;
  std::size_t cursor_ = 0;
};

std::string make_prompt(const PromptRequest& request);

struct BatchSample {
  PromptRequest request;
  SampleOptions options;  // seed actually used
  SampleResult result;
};

/// `count` samples; sample i uses seed options.seed + i. Runs samples in
/// parallel, output order is by index.
std::vector<BatchSample> batch_sample(const Parameters<float>& params, const Vocabulary& vocab,
                                      const std::vector<PromptRequest>& requests, const SampleOptions& options);

/// One JSON object per line describing requested flags and decode options.
std::string sidecar_line(const BatchSample& sample, std::size_t index);
/// Parses a sidecar line back into its request. Throws MalformedFile.
/// Missing size/instances values stay unset.
PromptRequest parse_sidecar_line(const std::string& line);

}  // namespace layoutprior
