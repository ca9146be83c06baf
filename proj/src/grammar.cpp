#include "layoutprior/grammar.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <random>

#include "layoutprior/error.hpp"

namespace layoutprior {

std::string_view to_string(Template t) { return t == Template::A ? "a" : "b"; }

std::string keypoint_letter(int joint) { return std::string(1, static_cast<char>('a' + joint)); }

std::string mask_label(int index) { return "m" + std::to_string(index); }

std::string coordinate_keyword(AnnotationType type, int index) {
  switch (type) {
    case AnnotationType::Box: return std::string(kBoxKeywords[index]);
    case AnnotationType::Keypoint: return keypoint_letter(index);
    case AnnotationType::Mask: return mask_label(index);
  }
  return {};
}

int tuple_arity(AnnotationType type) { return type == AnnotationType::Box ? 1 : 2; }

bool is_punctuation(char c) { return c == ';' || c == ',' || c == '[' || c == ']'; }

std::optional<int> parse_coordinate(std::string_view word) {
  if (word.empty() || word.size() > 3) return std::nullopt;
  if (word.size() > 1 && word[0] == '0') return std::nullopt;
  int v = 0;
  for (char c : word) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + (c - '0');
  }
  if (v > kCanvasSize) return std::nullopt;
  return v;
}

namespace {

bool is_digits(std::string_view w) {
  return !w.empty() && std::all_of(w.begin(), w.end(), [](char c) { return c >= '0' && c <= '9'; });
}

bool is_mask_label(std::string_view w) { return w.size() >= 2 && w[0] == 'm' && is_digits(w.substr(1)); }

bool is_keypoint_letter(std::string_view w) {
  return w.size() == 1 && w[0] >= 'a' && w[0] < 'a' + kMaxKeypoints;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

bool is_reserved_word(std::string_view word) {
  if (is_digits(word) || is_mask_label(word) || is_keypoint_letter(word)) return true;
  return std::find(std::begin(kBoxKeywords), std::end(kBoxKeywords), word) != std::end(kBoxKeywords);
}

void validate_category(std::string_view name) {
  auto fail = [&](const char* why) {
    throw Error(ErrorCode::InvalidCategory, "category '" + std::string(name) + "' " + why);
  };
  if (name.empty()) fail("is empty");
  if (is_space(name.front()) || is_space(name.back())) fail("has surrounding whitespace");
  std::size_t start = 0;
  for (std::size_t i = 0; i <= name.size(); ++i) {
    if (i < name.size() && is_punctuation(name[i])) fail("contains a separator");
    if (i < name.size() && is_space(name[i]) && name[i] != ' ') fail("contains non-space whitespace");
    if (i == name.size() || name[i] == ' ') {
      const std::string_view word = name.substr(start, i - start);
      if (word.empty()) fail("contains repeated spaces");
      if (is_reserved_word(word)) fail("contains a coordinate word");
      start = i + 1;
    }
  }
}

std::string join_symbols(std::span<const std::string> symbols) {
  std::string out;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    const std::string& s = symbols[i];
    const bool tight = s == ";" || s == "," || s == "]";
    if (i > 0 && !tight) out += ' ';
    out += s;
  }
  return out;
}

// ---------------------------------------------------------------------------
// serialization

namespace {

void check_geometry(const SceneRecord& scene) {
  for (const Instance& inst : scene.instances) {
    if (geometry_type(inst.geometry) != scene.annotation_type) {
      throw Error(ErrorCode::UnsupportedGeometry,
                  "instance '" + inst.category + "' does not match annotation type " +
                      std::string(to_string(scene.annotation_type)));
    }
    validate_category(inst.category);
  }
  if (scene.instances.empty()) throw Error(ErrorCode::EmptyScene, "cannot serialize a scene without instances");
}

void append_group(std::vector<std::string>& out, const Instance& inst, Template templ,
                  const GrammarOptions& options) {
  out.emplace_back("[");
  if (templ == Template::B) out.push_back(inst.category);
  auto coord = [&](int v) { out.push_back(std::to_string(v)); };
  if (const auto* b = std::get_if<Box>(&inst.geometry)) {
    const int values[4] = {b->xmin, b->ymin, b->xmax, b->ymax};
    for (int i = 0; i < 4; ++i) {
      if (options.special_words) out.emplace_back(kBoxKeywords[i]);
      coord(values[i]);
    }
  } else {
    const std::vector<Point>& pts = std::holds_alternative<Keypoints>(inst.geometry)
                                        ? std::get<Keypoints>(inst.geometry).joints
                                        : std::get<MaskContour>(inst.geometry).points;
    const AnnotationType type = geometry_type(inst.geometry);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (options.special_words) out.push_back(coordinate_keyword(type, static_cast<int>(i)));
      coord(pts[i].x);
      coord(pts[i].y);
    }
  }
  out.emplace_back("]");
}

}  // namespace

std::vector<std::string> scene_symbols(const SceneRecord& scene, Template templ,
                                       std::span<const std::size_t> order, const GrammarOptions& options) {
  check_geometry(scene);
  std::vector<std::string> out;
  out.emplace_back(to_string(scene.annotation_type));
  out.emplace_back(";");
  out.emplace_back(to_string(scene.data_type));
  out.emplace_back(";");
  out.emplace_back(to_string(scene.size_flag));
  out.emplace_back(";");
  out.push_back(std::to_string(scene.instances.size()));
  out.emplace_back(";");
  out.push_back(std::to_string(scene.n_keypoints));
  out.emplace_back(";");
  if (templ == Template::A) {
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (i > 0) out.emplace_back(",");
      out.push_back(scene.instances[order[i]].category);
    }
    out.emplace_back(";");
  }
  for (std::size_t idx : order) append_group(out, scene.instances[idx], templ, options);
  return out;
}

SequenceText serialize(const SceneRecord& scene, Template templ, std::uint64_t seed,
                       const GrammarOptions& options) {
  std::vector<std::size_t> order(scene.instances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return {join_symbols(scene_symbols(scene, templ, order, options)), templ};
}

SequenceText serialize_in_order(const SceneRecord& scene, Template templ, const GrammarOptions& options) {
  std::vector<std::size_t> order(scene.instances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  return {join_symbols(scene_symbols(scene, templ, order, options)), templ};
}

// ---------------------------------------------------------------------------
// lexing / parsing

std::vector<Lexeme> lex(std::string_view text) {
  std::vector<Lexeme> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (is_space(c)) {
      ++i;
    } else if (is_punctuation(c)) {
      out.push_back({text.substr(i, 1), i, true});
      ++i;
    } else {
      const std::size_t start = i;
      while (i < text.size() && !is_space(text[i]) && !is_punctuation(text[i])) ++i;
      out.push_back({text.substr(start, i - start), start, false});
    }
  }
  return out;
}

namespace {

struct FormatError {
  std::size_t position;
  std::string message;
};

struct Group {
  std::string category;  // T_b only
  std::vector<int> values;
  std::size_t offset = 0;
};

class Parser {
 public:
  Parser(std::string_view text, const GrammarOptions& options)
      : text_(text), lexemes_(lex(text)), options_(options) {}

  ParseResult run() {
    ParseResult result;
    ParseReport& report = result.report;
    try {
      parse_sentence(report);
      report.format_ok = true;
    } catch (const FormatError& e) {
      report.violations.push_back({e.position, ViolationKind::Format, e.message});
      return result;
    }
    check_matching(report);
    report.matching_ok = std::none_of(report.violations.begin(), report.violations.end(),
                                      [](const Violation& v) { return v.kind == ViolationKind::Matching; });
    if (report.matching_ok) result.record = build_record();
    return result;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const {
    throw FormatError{position(), message};
  }

  std::size_t position() const { return pos_ < lexemes_.size() ? lexemes_[pos_].offset : text_.size(); }
  bool at_end() const { return pos_ >= lexemes_.size(); }
  bool peek_punct(char c) const {
    return !at_end() && lexemes_[pos_].punct && lexemes_[pos_].text[0] == c;
  }

  void expect_punct(char c) {
    if (!peek_punct(c)) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  // Words up to (not including) the next punctuation, joined by one space.
  std::string word_run() {
    std::string out;
    while (!at_end() && !lexemes_[pos_].punct) {
      if (!out.empty()) out += ' ';
      out += lexemes_[pos_].text;
      ++pos_;
    }
    return out;
  }

  int integer_field(const char* what, int min_value) {
    const std::size_t at = position();
    const std::string w = word_run();
    const std::optional<int> v = parse_coordinate(w);
    if (!v || *v < min_value) throw FormatError{at, std::string("invalid ") + what + " '" + w + "'"};
    return *v;
  }

  void parse_sentence(ParseReport& report) {
    if (lexemes_.empty()) fail("empty sequence");
    {
      const std::size_t at = position();
      const std::string w = word_run();
      const auto t = parse_annotation_type(w);
      if (!t) throw FormatError{at, "unknown annotation type '" + w + "'"};
      type_ = *t;
    }
    expect_punct(';');
    {
      const std::size_t at = position();
      const std::string w = word_run();
      const auto d = parse_data_type(w);
      if (!d) throw FormatError{at, "unknown data type '" + w + "'"};
      data_type_ = *d;
    }
    expect_punct(';');
    {
      const std::size_t at = position();
      const std::string w = word_run();
      const auto s = parse_size_flag(w);
      if (!s) throw FormatError{at, "unknown size flag '" + w + "'"};
      size_ = *s;
    }
    expect_punct(';');
    declared_ = integer_field("instance count", 1);
    expect_punct(';');
    keypoints_ = integer_field("keypoint count", 0);
    expect_punct(';');
    report.declared_instances = declared_;
    report.declared_keypoints = keypoints_;

    templ_ = peek_punct('[') ? Template::B : Template::A;
    report.templ = templ_;
    if (templ_ == Template::A) {
      for (;;) {
        categories_offsets_.push_back(position());
        std::string cat = word_run();
        if (cat.empty()) fail("empty category name");
        categories_.push_back(std::move(cat));
        if (peek_punct(',')) {
          ++pos_;
          continue;
        }
        expect_punct(';');
        break;
      }
    }
    if (!peek_punct('[')) fail("expected coordinate group");
    while (peek_punct('[')) groups_.push_back(parse_group());
    if (!at_end()) fail("unexpected trailing input");
    report.category_count = static_cast<int>(templ_ == Template::A ? categories_.size() : groups_.size());
    report.group_count = static_cast<int>(groups_.size());
  }

  bool starts_coordinates(std::string_view w) const {
    if (options_.special_words) return w == coordinate_keyword(type_, 0);
    return parse_coordinate(w).has_value();
  }

  Group parse_group() {
    Group g;
    g.offset = position();
    expect_punct('[');
    if (templ_ == Template::B) {
      std::string cat;
      while (!at_end() && !lexemes_[pos_].punct && !starts_coordinates(lexemes_[pos_].text)) {
        if (!cat.empty()) cat += ' ';
        cat += lexemes_[pos_].text;
        ++pos_;
      }
      if (cat.empty()) fail("group without category name");
      g.category = std::move(cat);
    }
    const int arity = tuple_arity(type_);
    const int max_tuples = type_ == AnnotationType::Box        ? 4
                           : type_ == AnnotationType::Keypoint ? kMaxKeypoints
                                                               : -1;
    int tuple = 0;
    while (!peek_punct(']')) {
      if (at_end() || lexemes_[pos_].punct) fail("expected coordinate or ']'");
      if (max_tuples >= 0 && tuple >= max_tuples) fail("too many coordinates in group");
      if (options_.special_words) {
        const std::string kw = coordinate_keyword(type_, tuple);
        if (lexemes_[pos_].text != kw) fail("expected keyword '" + kw + "'");
        ++pos_;
      }
      for (int k = 0; k < arity; ++k) {
        if (at_end() || lexemes_[pos_].punct) fail("expected coordinate value");
        const auto v = parse_coordinate(lexemes_[pos_].text);
        if (!v) fail("invalid coordinate '" + std::string(lexemes_[pos_].text) + "'");
        g.values.push_back(*v);
        ++pos_;
      }
      ++tuple;
    }
    if (type_ == AnnotationType::Box && tuple != 4) fail("box group needs 4 coordinates");
    if (tuple == 0) fail("empty coordinate group");
    expect_punct(']');
    return g;
  }

  void matching(std::size_t at, std::string message) {
    violations_.push_back({at, ViolationKind::Matching, std::move(message)});
  }

  void check_matching(ParseReport& report) {
    const std::size_t head = lexemes_.front().offset;
    if (templ_ == Template::A && static_cast<int>(categories_.size()) != declared_) {
      matching(head, "declared " + std::to_string(declared_) + " instances but listed " +
                         std::to_string(categories_.size()) + " categories");
    }
    if (static_cast<int>(groups_.size()) != declared_) {
      matching(head, "declared " + std::to_string(declared_) + " instances but found " +
                         std::to_string(groups_.size()) + " coordinate groups");
    }
    if (type_ == AnnotationType::Keypoint) {
      if (keypoints_ != 14 && keypoints_ != 18) matching(head, "keypoint count must be 14 or 18");
    } else if (keypoints_ != 0) {
      matching(head, "keypoint count must be 0 for non-keypoint annotations");
    }
    for (const Group& g : groups_) {
      const int pairs = static_cast<int>(g.values.size()) / 2;
      if (type_ == AnnotationType::Keypoint && pairs != keypoints_) {
        matching(g.offset, "group has " + std::to_string(pairs) + " keypoints, declared " +
                               std::to_string(keypoints_));
      }
      if (type_ == AnnotationType::Mask && pairs != options_.mask_points) {
        matching(g.offset, "mask group has " + std::to_string(pairs) + " points, expected " +
                               std::to_string(options_.mask_points));
      }
    }
    if (options_.closed_categories) {
      const auto& allowed = *options_.closed_categories;
      if (templ_ == Template::A) {
        for (std::size_t i = 0; i < categories_.size(); ++i) {
          if (!allowed.contains(categories_[i])) {
            matching(categories_offsets_[i], "unknown category '" + categories_[i] + "'");
          }
        }
      } else {
        for (const Group& g : groups_) {
          if (!allowed.contains(g.category)) matching(g.offset, "unknown category '" + g.category + "'");
        }
      }
    }
    report.violations.insert(report.violations.end(), violations_.begin(), violations_.end());
  }

  SceneRecord build_record() const {
    SceneRecord rec;
    rec.annotation_type = type_;
    rec.data_type = data_type_;
    rec.size_flag = size_;
    rec.n_keypoints = keypoints_;
    for (std::size_t i = 0; i < groups_.size(); ++i) {
      const Group& g = groups_[i];
      Instance inst;
      inst.category = templ_ == Template::A ? categories_[i] : g.category;
      if (type_ == AnnotationType::Box) {
        inst.geometry = Box{g.values[0], g.values[1], g.values[2], g.values[3]};
      } else {
        std::vector<Point> pts;
        for (std::size_t k = 0; k + 1 < g.values.size(); k += 2) pts.push_back({g.values[k], g.values[k + 1]});
        if (type_ == AnnotationType::Keypoint) {
          inst.geometry = Keypoints{std::move(pts)};
        } else {
          inst.geometry = MaskContour{std::move(pts)};
        }
      }
      rec.instances.push_back(std::move(inst));
    }
    return rec;
  }

  std::string_view text_;
  std::vector<Lexeme> lexemes_;
  const GrammarOptions& options_;
  std::size_t pos_ = 0;

  AnnotationType type_ = AnnotationType::Box;
  DataType data_type_ = DataType::MultipleInstances;
  SizeFlag size_ = SizeFlag::Large;
  int declared_ = 0;
  int keypoints_ = 0;
  Template templ_ = Template::A;
  std::vector<std::string> categories_;
  std::vector<std::size_t> categories_offsets_;
  std::vector<Group> groups_;
  std::vector<Violation> violations_;
};

}  // namespace

ParseResult parse(std::string_view text, const GrammarOptions& options) {
  return Parser(text, options).run();
}

}  // namespace layoutprior
