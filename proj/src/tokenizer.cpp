#include "layoutprior/tokenizer.hpp"

#include <fstream>
#include <sstream>

#include "layoutprior/error.hpp"
#include "layoutprior/grammar.hpp"

namespace layoutprior {

namespace {

constexpr std::string_view kPunct[] = {";", ",", "[", "]"};
constexpr std::string_view kAnnotationWords[] = {"box", "key point", "mask"};
constexpr std::string_view kDataTypeWords[] = {"object centric", "multiple instances"};
constexpr std::string_view kSizeWords[] = {"small", "medium", "large"};

int word_count(std::string_view s) {
  int n = s.empty() ? 0 : 1;
  for (char c : s) n += c == ' ' ? 1 : 0;
  return n;
}

TokenKind classify(std::string_view t) {
  for (auto p : kPunct) {
    if (t == p) return TokenKind::Punct;
  }
  for (auto w : kAnnotationWords) {
    if (t == w) return TokenKind::AnnotationType;
  }
  for (auto w : kDataTypeWords) {
    if (t == w) return TokenKind::DataType;
  }
  for (auto w : kSizeWords) {
    if (t == w) return TokenKind::Size;
  }
  if (parse_coordinate(t)) return TokenKind::Integer;
  if (is_reserved_word(t)) return TokenKind::Keyword;
  return TokenKind::Category;
}

}  // namespace

void Vocabulary::add(std::string token, TokenKind kind) {
  if (index_.contains(token)) return;
  index_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(std::move(token));
  kinds_.push_back(kind);
}

void Vocabulary::finalize() {
  integer_ids_.assign(kCanvasSize + 1, -1);
  category_ids_.clear();
  special_words_ = false;
  mask_points_ = 0;
  max_phrase_words_ = 1;
  for (int id = 0; id < size(); ++id) {
    const std::string& t = tokens_[static_cast<std::size_t>(id)];
    switch (kinds_[static_cast<std::size_t>(id)]) {
      case TokenKind::Integer:
        integer_ids_[static_cast<std::size_t>(*parse_coordinate(t))] = id;
        break;
      case TokenKind::Category:
        category_ids_.push_back(id);
        break;
      case TokenKind::Keyword:
        if (t == "xmin") special_words_ = true;
        if (t.size() >= 2 && t[0] == 'm') ++mask_points_;
        break;
      default:
        break;
    }
    max_phrase_words_ = std::max(max_phrase_words_, word_count(t));
  }
}

Vocabulary Vocabulary::build(std::span<const std::string> corpus_lines, const VocabularyOptions& options) {
  if (corpus_lines.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot build a vocabulary from an empty corpus");
  Vocabulary v;
  for (std::size_t i = 0; i < 4; ++i) v.add(std::string(kReserved[i]), TokenKind::Reserved);
  for (auto p : kPunct) v.add(std::string(p), TokenKind::Punct);
  for (auto w : kAnnotationWords) v.add(std::string(w), TokenKind::AnnotationType);
  for (auto w : kDataTypeWords) v.add(std::string(w), TokenKind::DataType);
  for (auto w : kSizeWords) v.add(std::string(w), TokenKind::Size);
  for (int i = 0; i <= kCanvasSize; ++i) v.add(std::to_string(i), TokenKind::Integer);
  if (options.special_words) {
    for (auto k : kBoxKeywords) v.add(std::string(k), TokenKind::Keyword);
    for (int j = 0; j < kMaxKeypoints; ++j) v.add(keypoint_letter(j), TokenKind::Keyword);
    for (int j = 0; j < options.mask_points; ++j) v.add(mask_label(j), TokenKind::Keyword);
  }

  GrammarOptions grammar;
  grammar.special_words = options.special_words;
  grammar.mask_points = options.mask_points;
  for (const std::string& line : corpus_lines) {
    const ParseResult parsed = parse(line, grammar);
    if (parsed.record) {
      for (const Instance& inst : parsed.record->instances) v.add(inst.category, TokenKind::Category);
      continue;
    }
    // Not a clean sentence: fall back to single words so coverage still holds.
    for (const Lexeme& lx : lex(line)) {
      const std::string word(lx.text);
      v.add(word, classify(word));
    }
  }
  v.finalize();
  return v;
}

Vocabulary Vocabulary::from_text(std::string_view file_text) {
  Vocabulary v;
  std::size_t start = 0;
  while (start < file_text.size()) {
    std::size_t end = file_text.find('\n', start);
    if (end == std::string_view::npos) end = file_text.size();
    std::string line(file_text.substr(start, end - start));
    start = end + 1;
    const std::size_t id = v.tokens_.size();
    if (id < 4) {
      if (line != kReserved[id]) {
        throw Error(ErrorCode::MalformedFile, "vocabulary header line " + std::to_string(id + 1) +
                                                  " must be " + std::string(kReserved[id]));
      }
      v.add(std::move(line), TokenKind::Reserved);
      continue;
    }
    if (line.empty() || v.index_.contains(line)) {
      throw Error(ErrorCode::MalformedFile, "vocabulary line " + std::to_string(id + 1) + " is empty or duplicated");
    }
    const TokenKind kind = classify(line);
    v.add(std::move(line), kind);
  }
  if (v.tokens_.size() < 4) throw Error(ErrorCode::MalformedFile, "vocabulary file lacks the reserved header");
  v.finalize();
  return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open vocabulary " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

std::string Vocabulary::to_text() const {
  std::string out;
  for (const std::string& t : tokens_) {
    out += t;
    out += '\n';
  }
  return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write vocabulary " + path.string());
  out << to_text();
}

std::optional<int> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int Vocabulary::id(std::string_view token) const {
  const auto found = find(token);
  if (!found) throw Error(ErrorCode::IdOutOfRange, "token '" + std::string(token) + "' not in vocabulary");
  return *found;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw Error(ErrorCode::IdOutOfRange, "token id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

TokenKind Vocabulary::kind(int id) const {
  if (id < 0 || id >= size()) throw Error(ErrorCode::IdOutOfRange, "token id " + std::to_string(id) + " out of range");
  return kinds_[static_cast<std::size_t>(id)];
}

std::optional<int> Vocabulary::integer_value(int id) const {
  if (kind(id) != TokenKind::Integer) return std::nullopt;
  return parse_coordinate(tokens_[static_cast<std::size_t>(id)]);
}

// ---------------------------------------------------------------------------

EncodeResult encode_symbols(std::string_view text, const Vocabulary& vocab) {
  EncodeResult out;
  const std::vector<Lexeme> lexemes = lex(text);
  std::size_t i = 0;
  while (i < lexemes.size()) {
    if (lexemes[i].punct) {
      out.ids.push_back(vocab.id(lexemes[i].text));
      ++i;
      continue;
    }
    std::size_t run_end = i;
    while (run_end < lexemes.size() && !lexemes[run_end].punct) ++run_end;
    while (i < run_end) {
      const std::size_t longest = std::min<std::size_t>(run_end - i, static_cast<std::size_t>(vocab.max_phrase_words()));
      bool matched = false;
      for (std::size_t len = longest; len >= 1 && !matched; --len) {
        std::string phrase(lexemes[i].text);
        for (std::size_t k = 1; k < len; ++k) {
          phrase += ' ';
          phrase += lexemes[i + k].text;
        }
        if (auto id = vocab.find(phrase); id && vocab.kind(*id) != TokenKind::Reserved) {
          out.ids.push_back(*id);
          i += len;
          matched = true;
        }
      }
      if (!matched) {
        out.ids.push_back(Vocabulary::kUnk);
        ++out.unk_count;
        ++i;
      }
    }
  }
  return out;
}

EncodeResult encode(std::string_view text, const Vocabulary& vocab) {
  EncodeResult body = encode_symbols(text, vocab);
  EncodeResult out;
  out.unk_count = body.unk_count;
  out.ids.reserve(body.ids.size() + 2);
  out.ids.push_back(Vocabulary::kBos);
  out.ids.insert(out.ids.end(), body.ids.begin(), body.ids.end());
  out.ids.push_back(Vocabulary::kEos);
  return out;
}

std::string decode(std::span<const int> ids, const Vocabulary& vocab) {
  std::vector<std::string> symbols;
  for (int id : ids) {
    const std::string& t = vocab.token(id);
    if (id == Vocabulary::kEos) break;
    if (id == Vocabulary::kBos || id == Vocabulary::kPad) continue;
    symbols.push_back(t);
  }
  return join_symbols(symbols);
}

}  // namespace layoutprior
