#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "layoutprior/scene.hpp"

namespace layoutprior {

using TokenSeq = std::vector<int>;

enum class TokenKind { Reserved, Punct, AnnotationType, DataType, Size, Integer, Keyword, Category };

struct VocabularyOptions {
  bool special_words = true;
  int mask_points = kDefaultMaskPoints;
};

/// Whole-word vocabulary: every grammar symbol (flag word, category name,
/// integer, coordinate keyword, punctuation) is exactly one token.
///
/// Layout: reserved ids 0..3, punctuation, flag words, the integers
/// 0..512, coordinate keywords (special-words mode), then corpus-derived
/// symbols in first-appearance order.
class Vocabulary {
 public:
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kPad = 2;
  static constexpr int kUnk = 3;
  static constexpr std::string_view kReserved[4] = {"<bos>", "<eos>", "<pad>", "<unk>"};

  Vocabulary() = default;

  static Vocabulary build(std::span<const std::string> corpus_lines, const VocabularyOptions& options = {});
  static Vocabulary from_text(std::string_view file_text);
  static Vocabulary load(const std::filesystem::path& path);

  std::string to_text() const;
  void save(const std::filesystem::path& path) const;

  int size() const { return static_cast<int>(tokens_.size()); }
  std::optional<int> find(std::string_view token) const;
  int id(std::string_view token) const;  // throws IdOutOfRange when absent
  const std::string& token(int id) const;
  TokenKind kind(int id) const;
  /// Value of an integer token, or nullopt.
  std::optional<int> integer_value(int id) const;
  int integer_id(int value) const { return integer_ids_.at(static_cast<std::size_t>(value)); }

  const std::vector<int>& category_ids() const { return category_ids_; }
  bool special_words() const { return special_words_; }
  int mask_points() const { return mask_points_; }
  int max_phrase_words() const { return max_phrase_words_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  void add(std::string token, TokenKind kind);
  void finalize();

  std::vector<std::string> tokens_;
  std::vector<TokenKind> kinds_;
  std::unordered_map<std::string, int> index_;
  std::vector<int> integer_ids_;
  std::vector<int> category_ids_;
  bool special_words_ = false;
  int mask_points_ = 0;
  int max_phrase_words_ = 1;
};

struct EncodeResult {
  TokenSeq ids;
  int unk_count = 0;
};

/// BOS + one id per symbol + EOS. Multi-word symbols are matched greedily
/// (longest phrase first); unknown words become UNK.
EncodeResult encode(std::string_view text, const Vocabulary& vocab);
/// Symbol ids without BOS/EOS; used for prompts.
EncodeResult encode_symbols(std::string_view text, const Vocabulary& vocab);

/// Canonical text; BOS/PAD are skipped and decoding stops at EOS.
std::string decode(std::span<const int> ids, const Vocabulary& vocab);

}  // namespace layoutprior
