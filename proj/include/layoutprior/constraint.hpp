#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "layoutprior/grammar.hpp"
#include "layoutprior/tokenizer.hpp"

namespace layoutprior {

enum class TemplateChoice { A, B, Either };

enum class Phase {
  AnnotationType,
  AfterAnnotationType,
  DataType,
  AfterDataType,
  Size,
  AfterSize,
  Count,
  AfterCount,
  Keypoints,
  AfterKeypoints,
  Body,         // first symbol after the flags: a category (T_a) or '[' (T_b)
  Category,     // T_a, after ','
  CategorySep,  // T_a, ',' or ';'
  GroupOpen,
  GroupCategory,
  Keyword,
  Value,
  GroupClose,
  End,
  Done,
};

/// Position of a deterministic recognizer over token ids. Plain value type.
struct GrammarState {
  TemplateChoice templ = TemplateChoice::Either;
  Phase phase = Phase::AnnotationType;
  AnnotationType type = AnnotationType::Box;
  bool type_known = false;
  int declared = 0;      // 0 until the count field is read
  int keypoints = -1;    // -1 until the keypoint field is read
  int categories = 0;    // T_a category names emitted
  int groups = 0;        // closed coordinate groups
  int tuple = 0;         // coordinate tuple within the open group
  int value = 0;         // value within the tuple
  int group_symbols = 0; // symbols emitted inside the open group
  int emitted = 0;       // symbols emitted since BOS

  bool terminal() const { return phase == Phase::Done; }
};

struct ConstraintOptions {
  /// Symbols allowed after BOS, EOS included; 0 = unbounded.
  int max_symbols = 0;
  int max_instances = kCanvasSize;
  /// Restricts category positions; default is every category in the vocabulary.
  std::optional<std::vector<std::string>> categories;
};

/// Token-level automaton for the template language bound to one vocabulary.
/// Every path it admits to EOS parses with Format and Matching intact.
class TokenGrammar {
 public:
  TokenGrammar(const Vocabulary& vocab, ConstraintOptions options = {});

  GrammarState init_state(TemplateChoice templ = TemplateChoice::Either) const;
  /// Sorted allowed ids; throws TerminalState once EOS has been consumed.
  std::vector<int> next_allowed_tokens(const GrammarState& state) const;
  bool accepts(const GrammarState& state, int token) const;
  /// Throws IllegalToken / TerminalState.
  GrammarState advance(const GrammarState& state, int token) const;
  /// Feeds a symbol sequence; throws IllegalToken naming the offending index.
  GrammarState consume(GrammarState state, std::span<const int> tokens) const;
  /// Fewest symbols (EOS included) that can still complete the sentence.
  int min_completion(const GrammarState& state) const;

  const Vocabulary& vocab() const { return *vocab_; }
  const ConstraintOptions& options() const { return options_; }

 private:
  int tuples_per_group(AnnotationType type, int keypoints) const;
  int group_length(AnnotationType type, int keypoints, bool templ_b) const;
  int tail_after_header(AnnotationType type, int n, int keypoints, TemplateChoice templ) const;
  bool feasible(const GrammarState& next) const;
  std::optional<GrammarState> step(const GrammarState& state, int token) const;
  void candidates(const GrammarState& state, std::vector<int>& out) const;

  const Vocabulary* vocab_;
  ConstraintOptions options_;
  std::vector<int> category_ids_;
  std::vector<bool> is_category_;
  int semicolon_, comma_, open_, close_;
  int annotation_ids_[3];
  int data_type_ids_[2];
  int size_ids_[3];
};

}  // namespace layoutprior
