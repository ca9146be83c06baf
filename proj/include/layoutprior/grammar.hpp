#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "layoutprior/scene.hpp"

namespace layoutprior {

/// T_a lists every category before the coordinate groups; T_b puts each
/// category inside its own group, which is what scene continuation needs.
enum class Template { A, B };

std::string_view to_string(Template t);

struct GrammarOptions {
  /// Coordinate keywords (xmin.., a.., m0..) present in groups.
  bool special_words = true;
  int mask_points = kDefaultMaskPoints;
  /// When set, categories outside the set are Matching failures.
  std::optional<std::set<std::string>> closed_categories;
};

struct SequenceText {
  std::string text;
  Template templ = Template::A;
};

// Sequence vocabulary shared by the parser, the tokenizer and the token-level
// constraint automaton.
inline constexpr std::string_view kBoxKeywords[4] = {"xmin", "ymin", "xmax", "ymax"};
inline constexpr int kMaxKeypoints = 18;
std::string keypoint_letter(int joint);  // 0 -> "a"
std::string mask_label(int index);       // 0 -> "m0"
/// Keyword that opens coordinate tuple `index` of a group.
std::string coordinate_keyword(AnnotationType type, int index);
/// Integers per keyword (1 for boxes, 2 for points).
int tuple_arity(AnnotationType type);

bool is_punctuation(char c);
/// Canonical integer literal in [0, kCanvasSize] (no sign, no leading zeros).
std::optional<int> parse_coordinate(std::string_view word);
bool is_reserved_word(std::string_view word);

/// Throws InvalidCategory for names that cannot be atomic symbols.
void validate_category(std::string_view name);

/// Canonical rendering: single spaces, none before ';' ',' ']'.
std::string join_symbols(std::span<const std::string> symbols);

/// Symbol stream for a scene with instances in the given order.
std::vector<std::string> scene_symbols(const SceneRecord& scene, Template templ,
                                       std::span<const std::size_t> order,
                                       const GrammarOptions& options = {});

/// Serializes with a seed-deterministic shuffle of the instance order.
SequenceText serialize(const SceneRecord& scene, Template templ, std::uint64_t seed,
                       const GrammarOptions& options = {});
/// Serializes keeping the stored instance order.
SequenceText serialize_in_order(const SceneRecord& scene, Template templ,
                                const GrammarOptions& options = {});

enum class ViolationKind { Format, Matching };

struct Violation {
  std::size_t position = 0;  // byte offset into the input
  ViolationKind kind = ViolationKind::Format;
  std::string message;
};

struct ParseReport {
  bool format_ok = false;
  bool matching_ok = false;
  std::optional<Template> templ;
  int declared_instances = 0;
  int declared_keypoints = 0;
  int category_count = 0;
  int group_count = 0;
  std::vector<Violation> violations;
};

struct ParseResult {
  std::optional<SceneRecord> record;  // present iff format_ok && matching_ok
  ParseReport report;
};

/// Total on arbitrary input; never throws on malformed text.
ParseResult parse(std::string_view text, const GrammarOptions& options = {});

struct Lexeme {
  std::string_view text;
  std::size_t offset = 0;
  bool punct = false;
};

/// Splits on whitespace; ';' ',' '[' ']' are always standalone lexemes.
std::vector<Lexeme> lex(std::string_view text);

}  // namespace layoutprior
