#include "layoutprior/error.hpp"

namespace layoutprior {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::EmptyScene: return "EmptyScene";
    case ErrorCode::DegeneratePolygon: return "DegeneratePolygon";
    case ErrorCode::UnsupportedGeometry: return "UnsupportedGeometry";
    case ErrorCode::InvalidCategory: return "InvalidCategory";
    case ErrorCode::TerminalState: return "TerminalState";
    case ErrorCode::IllegalToken: return "IllegalToken";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::IdOutOfRange: return "IdOutOfRange";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::SequenceTooLong: return "SequenceTooLong";
    case ErrorCode::AllPadded: return "AllPadded";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::IllegalPromptPrefix: return "IllegalPromptPrefix";
    case ErrorCode::ContextOverflow: return "ContextOverflow";
    case ErrorCode::DeclaredCountExhausted: return "DeclaredCountExhausted";
    case ErrorCode::NoInstances: return "NoInstances";
    case ErrorCode::SupportMismatch: return "SupportMismatch";
    case ErrorCode::MissingSidecar: return "MissingSidecar";
    case ErrorCode::InsufficientValidSamples: return "InsufficientValidSamples";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Usage: return "Usage";
  }
  return "Unknown";
}

ErrorFamily family_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedFile:
    case ErrorCode::SchemaViolation:
    case ErrorCode::EmptyDataset:
    case ErrorCode::EmptyScene:
    case ErrorCode::DegeneratePolygon:
    case ErrorCode::EmptyCorpus:
      return ErrorFamily::Input;
    case ErrorCode::UnsupportedGeometry:
    case ErrorCode::InvalidCategory:
    case ErrorCode::TerminalState:
    case ErrorCode::IllegalToken:
    case ErrorCode::IdOutOfRange:
      return ErrorFamily::Grammar;
    case ErrorCode::InvalidConfig:
    case ErrorCode::SequenceTooLong:
    case ErrorCode::AllPadded:
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::ChecksumMismatch:
    case ErrorCode::VersionMismatch:
      return ErrorFamily::Model;
    case ErrorCode::IllegalPromptPrefix:
    case ErrorCode::ContextOverflow:
    case ErrorCode::DeclaredCountExhausted:
      return ErrorFamily::Sampling;
    case ErrorCode::NoInstances:
    case ErrorCode::SupportMismatch:
    case ErrorCode::MissingSidecar:
    case ErrorCode::InsufficientValidSamples:
      return ErrorFamily::Eval;
    case ErrorCode::Io:
      return ErrorFamily::Io;
    case ErrorCode::Usage:
      return ErrorFamily::Usage;
  }
  return ErrorFamily::Usage;
}

std::string_view to_string(ErrorFamily family) {
  switch (family) {
    case ErrorFamily::Usage: return "usage";
    case ErrorFamily::Input: return "input";
    case ErrorFamily::Grammar: return "grammar";
    case ErrorFamily::Model: return "model";
    case ErrorFamily::Sampling: return "sampling";
    case ErrorFamily::Eval: return "eval";
    case ErrorFamily::Io: return "io";
  }
  return "unknown";
}

}  // namespace layoutprior
