#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "layoutprior/config.hpp"

namespace layoutprior {

/// Per-invocation inputs that do not belong in the config file.
struct CommandInputs {
  std::optional<std::string> prompt;
  std::optional<std::filesystem::path> prompt_file;
  std::optional<std::filesystem::path> input;
  std::optional<std::filesystem::path> resume;
};

/// Output layout under RunConfig::out_dir.
namespace outputs {
inline constexpr const char* kCorpus = "corpus.txt";
inline constexpr const char* kManifest = "corpus.manifest.json";
inline constexpr const char* kVocab = "vocab.txt";
inline constexpr const char* kCheckpoints = "checkpoints";
inline constexpr const char* kLatest = "latest.ckpt";
inline constexpr const char* kLossLog = "loss.csv";
inline constexpr const char* kSamples = "samples.txt";
inline constexpr const char* kSidecar = "samples.meta.jsonl";
inline constexpr const char* kLayouts = "layouts.jsonl";
inline constexpr const char* kDecodeReport = "decode_report.txt";
inline constexpr const char* kEvalDir = "eval";
inline constexpr const char* kSvgDir = "svg";
}  // namespace outputs

std::filesystem::path checkpoint_path(const RunConfig& config, std::int64_t step);

/// Builds corpus.txt, corpus.manifest.json and vocab.txt.
void cmd_ingest(const RunConfig& config, std::ostream& log);
/// Trains on corpus.txt; writes checkpoints and loss.csv. `inputs.resume`
/// continues from a checkpoint and appends to the loss log.
void cmd_train(const RunConfig& config, const CommandInputs& inputs, std::ostream& log);
/// Writes samples.txt and samples.meta.jsonl. Without a prompt, prompts
/// come from the evaluation prompt generator.
void cmd_sample(const RunConfig& config, const CommandInputs& inputs, std::ostream& log);
/// Parses a sequence file (default samples.txt) into layouts.jsonl and
/// decode_report.txt.
void cmd_decode(const RunConfig& config, const CommandInputs& inputs, std::ostream& log);
/// Compares model samples against a ground-truth corpus (default corpus.txt).
void cmd_eval(const RunConfig& config, const CommandInputs& inputs, std::ostream& log);
/// Renders a layout file (default layouts.jsonl) to svg/<hash>.svg.
void cmd_render(const RunConfig& config, const CommandInputs& inputs, std::ostream& log);

}  // namespace layoutprior
