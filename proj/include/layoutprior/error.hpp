#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace layoutprior {

enum class ErrorCode {
  // annotations
  MalformedFile,
  SchemaViolation,
  EmptyDataset,
  EmptyScene,
  DegeneratePolygon,
  // grammar
  UnsupportedGeometry,
  InvalidCategory,
  TerminalState,
  IllegalToken,
  // tokenizer
  EmptyCorpus,
  IdOutOfRange,
  // model
  InvalidConfig,
  SequenceTooLong,
  AllPadded,
  NonFiniteLoss,
  ChecksumMismatch,
  VersionMismatch,
  // sampler
  IllegalPromptPrefix,
  ContextOverflow,
  DeclaredCountExhausted,
  // evalsuite
  NoInstances,
  SupportMismatch,
  MissingSidecar,
  InsufficientValidSamples,
  // plumbing
  Io,
  Usage,
};

/// Coarse grouping used for process exit codes.
enum class ErrorFamily { Usage = 2, Input = 3, Grammar = 4, Model = 5, Sampling = 6, Eval = 7, Io = 8 };

std::string_view to_string(ErrorCode code);
ErrorFamily family_of(ErrorCode code);
std::string_view to_string(ErrorFamily family);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorFamily family() const noexcept { return family_of(code_); }

 private:
  ErrorCode code_;
};

}  // namespace layoutprior
