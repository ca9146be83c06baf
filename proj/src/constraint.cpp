#include "layoutprior/constraint.hpp"

#include <algorithm>
#include <limits>

#include "layoutprior/error.hpp"

namespace layoutprior {

namespace {

constexpr int kHeaderSymbols = 10;  // five flags, five ';'

int header_index(Phase p) { return static_cast<int>(p); }

bool in_group(Phase p) {
  return p == Phase::GroupCategory || p == Phase::Keyword || p == Phase::Value || p == Phase::GroupClose;
}

}  // namespace

TokenGrammar::TokenGrammar(const Vocabulary& vocab, ConstraintOptions options)
    : vocab_(&vocab), options_(std::move(options)) {
  if (options_.categories) {
    for (const std::string& c : *options_.categories) category_ids_.push_back(vocab.id(c));
    std::sort(category_ids_.begin(), category_ids_.end());
  } else {
    category_ids_ = vocab.category_ids();
  }
  if (category_ids_.empty()) throw Error(ErrorCode::InvalidConfig, "constraint grammar needs at least one category");
  is_category_.assign(static_cast<std::size_t>(vocab.size()), false);
  for (int id : category_ids_) is_category_[static_cast<std::size_t>(id)] = true;
  semicolon_ = vocab.id(";");
  comma_ = vocab.id(",");
  open_ = vocab.id("[");
  close_ = vocab.id("]");
  annotation_ids_[0] = vocab.id("box");
  annotation_ids_[1] = vocab.id("key point");
  annotation_ids_[2] = vocab.id("mask");
  data_type_ids_[0] = vocab.id("object centric");
  data_type_ids_[1] = vocab.id("multiple instances");
  size_ids_[0] = vocab.id("small");
  size_ids_[1] = vocab.id("medium");
  size_ids_[2] = vocab.id("large");
  options_.max_instances = std::clamp(options_.max_instances, 1, kCanvasSize);
  if (vocab.special_words() && vocab.mask_points() < 3) {
    throw Error(ErrorCode::InvalidConfig, "vocabulary has fewer than 3 mask labels");
  }
}

int TokenGrammar::tuples_per_group(AnnotationType type, int keypoints) const {
  switch (type) {
    case AnnotationType::Box: return 4;
    case AnnotationType::Keypoint: return keypoints;
    case AnnotationType::Mask: return vocab_->special_words() ? vocab_->mask_points() : kDefaultMaskPoints;
  }
  return 4;
}

int TokenGrammar::group_length(AnnotationType type, int keypoints, bool templ_b) const {
  const int per_tuple = tuple_arity(type) + (vocab_->special_words() ? 1 : 0);
  return 2 + (templ_b ? 1 : 0) + tuples_per_group(type, keypoints) * per_tuple;
}

int TokenGrammar::tail_after_header(AnnotationType type, int n, int keypoints, TemplateChoice templ) const {
  const int tail_a = 2 * n + n * group_length(type, keypoints, false) + 1;
  const int tail_b = n * group_length(type, keypoints, true) + 1;
  switch (templ) {
    case TemplateChoice::A: return tail_a;
    case TemplateChoice::B: return tail_b;
    case TemplateChoice::Either: return std::min(tail_a, tail_b);
  }
  return tail_a;
}

int TokenGrammar::min_completion(const GrammarState& s) const {
  if (s.phase == Phase::Done) return 0;
  if (s.phase == Phase::End) return 1;
  if (header_index(s.phase) < header_index(Phase::Body)) {
    const int header_left = kHeaderSymbols - header_index(s.phase);
    const int n = s.declared > 0 ? s.declared : 1;
    auto tail_for = [&](AnnotationType type) {
      const int k = type != AnnotationType::Keypoint ? 0 : (s.keypoints > 0 ? s.keypoints : 14);
      return tail_after_header(type, n, k, s.templ);
    };
    int tail = 0;
    if (s.type_known) {
      tail = tail_for(s.type);
    } else {
      tail = std::min({tail_for(AnnotationType::Box), tail_for(AnnotationType::Keypoint),
                       tail_for(AnnotationType::Mask)});
    }
    return header_left + tail;
  }
  const int n = s.declared;
  const int k = std::max(s.keypoints, 0);
  if (s.phase == Phase::Body) return tail_after_header(s.type, n, k, s.templ);

  const bool templ_b = s.templ == TemplateChoice::B;
  const int g = group_length(s.type, k, templ_b);
  switch (s.phase) {
    case Phase::Category: return 2 * (n - s.categories) + n * g + 1;
    case Phase::CategorySep: return 2 * (n - s.categories) + 1 + n * g + 1;
    case Phase::GroupOpen: return (n - s.groups) * g + 1;
    default: break;
  }
  // inside an open group
  return (g - s.group_symbols) + (n - s.groups - 1) * g + 1;
}

GrammarState TokenGrammar::init_state(TemplateChoice templ) const {
  GrammarState s;
  s.templ = templ;
  return s;
}

std::optional<GrammarState> TokenGrammar::step(const GrammarState& s, int token) const {
  if (token < 0 || token >= vocab_->size()) return std::nullopt;
  GrammarState n = s;
  ++n.emitted;
  if (in_group(s.phase)) ++n.group_symbols;
  const bool sw = vocab_->special_words();

  auto enter_coordinates = [&](GrammarState& st) {
    st.tuple = 0;
    st.value = 0;
    st.phase = sw ? Phase::Keyword : Phase::Value;
  };

  switch (s.phase) {
    case Phase::AnnotationType:
      for (int i = 0; i < 3; ++i) {
        if (token == annotation_ids_[i]) {
          n.type = static_cast<AnnotationType>(i);
          n.type_known = true;
          n.phase = Phase::AfterAnnotationType;
          return n;
        }
      }
      return std::nullopt;
    case Phase::DataType:
      if (token != data_type_ids_[0] && token != data_type_ids_[1]) return std::nullopt;
      n.phase = Phase::AfterDataType;
      return n;
    case Phase::Size:
      if (token != size_ids_[0] && token != size_ids_[1] && token != size_ids_[2]) return std::nullopt;
      n.phase = Phase::AfterSize;
      return n;
    case Phase::Count: {
      const auto v = vocab_->integer_value(token);
      if (!v || *v < 1 || *v > options_.max_instances) return std::nullopt;
      n.declared = *v;
      n.phase = Phase::AfterCount;
      return n;
    }
    case Phase::Keypoints: {
      const auto v = vocab_->integer_value(token);
      if (!v) return std::nullopt;
      const bool ok = s.type == AnnotationType::Keypoint ? (*v == 14 || *v == 18) : *v == 0;
      if (!ok) return std::nullopt;
      n.keypoints = *v;
      n.phase = Phase::AfterKeypoints;
      return n;
    }
    case Phase::AfterAnnotationType:
    case Phase::AfterDataType:
    case Phase::AfterSize:
    case Phase::AfterCount:
    case Phase::AfterKeypoints:
      if (token != semicolon_) return std::nullopt;
      n.phase = static_cast<Phase>(header_index(s.phase) + 1);
      return n;
    case Phase::Body:
      if (s.templ != TemplateChoice::B && is_category_[static_cast<std::size_t>(token)]) {
        n.templ = TemplateChoice::A;
        n.categories = 1;
        n.phase = Phase::CategorySep;
        return n;
      }
      if (s.templ != TemplateChoice::A && token == open_) {
        n.templ = TemplateChoice::B;
        n.group_symbols = 1;
        n.phase = Phase::GroupCategory;
        return n;
      }
      return std::nullopt;
    case Phase::Category:
      if (!is_category_[static_cast<std::size_t>(token)]) return std::nullopt;
      ++n.categories;
      n.phase = Phase::CategorySep;
      return n;
    case Phase::CategorySep:
      if (token == comma_ && s.categories < s.declared) {
        n.phase = Phase::Category;
        return n;
      }
      if (token == semicolon_ && s.categories == s.declared) {
        n.phase = Phase::GroupOpen;
        return n;
      }
      return std::nullopt;
    case Phase::GroupOpen:
      if (token != open_ || s.groups >= s.declared) return std::nullopt;
      n.group_symbols = 1;
      if (s.templ == TemplateChoice::B) {
        n.phase = Phase::GroupCategory;
      } else {
        enter_coordinates(n);
      }
      return n;
    case Phase::GroupCategory:
      if (!is_category_[static_cast<std::size_t>(token)]) return std::nullopt;
      enter_coordinates(n);
      return n;
    case Phase::Keyword:
      if (vocab_->token(token) != coordinate_keyword(s.type, s.tuple)) return std::nullopt;
      n.phase = Phase::Value;
      return n;
    case Phase::Value:
      if (vocab_->kind(token) != TokenKind::Integer) return std::nullopt;
      if (++n.value == tuple_arity(s.type)) {
        n.value = 0;
        ++n.tuple;
        if (n.tuple == tuples_per_group(s.type, std::max(s.keypoints, 0))) {
          n.phase = Phase::GroupClose;
        } else {
          n.phase = sw ? Phase::Keyword : Phase::Value;
        }
      }
      return n;
    case Phase::GroupClose:
      if (token != close_) return std::nullopt;
      ++n.groups;
      n.group_symbols = 0;
      n.phase = n.groups == s.declared ? Phase::End : Phase::GroupOpen;
      return n;
    case Phase::End:
      if (token != Vocabulary::kEos) return std::nullopt;
      n.phase = Phase::Done;
      return n;
    case Phase::Done:
      return std::nullopt;
  }
  return std::nullopt;
}

bool TokenGrammar::feasible(const GrammarState& next) const {
  if (options_.max_symbols <= 0) return true;
  return next.emitted + min_completion(next) <= options_.max_symbols;
}

bool TokenGrammar::accepts(const GrammarState& state, int token) const {
  const auto next = step(state, token);
  return next && feasible(*next);
}

GrammarState TokenGrammar::advance(const GrammarState& state, int token) const {
  if (state.terminal()) throw Error(ErrorCode::TerminalState, "grammar state is terminal");
  const auto next = step(state, token);
  if (!next || !feasible(*next)) {
    const std::string shown = token >= 0 && token < vocab_->size() ? vocab_->token(token) : std::to_string(token);
    throw Error(ErrorCode::IllegalToken, "token '" + shown + "' is not allowed here");
  }
  return *next;
}

GrammarState TokenGrammar::consume(GrammarState state, std::span<const int> tokens) const {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    try {
      state = advance(state, tokens[i]);
    } catch (const Error& e) {
      throw Error(e.code(), "symbol " + std::to_string(i) + ": " + e.what());
    }
  }
  return state;
}

void TokenGrammar::candidates(const GrammarState& s, std::vector<int>& out) const {
  auto integers = [&](int lo, int hi) {
    for (int v = lo; v <= hi; ++v) out.push_back(vocab_->integer_id(v));
  };
  switch (s.phase) {
    case Phase::AnnotationType: out.assign(std::begin(annotation_ids_), std::end(annotation_ids_)); break;
    case Phase::DataType: out.assign(std::begin(data_type_ids_), std::end(data_type_ids_)); break;
    case Phase::Size: out.assign(std::begin(size_ids_), std::end(size_ids_)); break;
    case Phase::Count: integers(1, options_.max_instances); break;
    case Phase::Keypoints:
      if (s.type == AnnotationType::Keypoint) {
        out.push_back(vocab_->integer_id(14));
        out.push_back(vocab_->integer_id(18));
      } else {
        out.push_back(vocab_->integer_id(0));
      }
      break;
    case Phase::AfterAnnotationType:
    case Phase::AfterDataType:
    case Phase::AfterSize:
    case Phase::AfterCount:
    case Phase::AfterKeypoints:
      out.push_back(semicolon_);
      break;
    case Phase::Body:
      if (s.templ != TemplateChoice::B) out = category_ids_;
      if (s.templ != TemplateChoice::A) out.push_back(open_);
      break;
    case Phase::Category:
    case Phase::GroupCategory:
      out = category_ids_;
      break;
    case Phase::CategorySep: out.push_back(s.categories < s.declared ? comma_ : semicolon_); break;
    case Phase::GroupOpen: out.push_back(open_); break;
    case Phase::Keyword: out.push_back(vocab_->id(coordinate_keyword(s.type, s.tuple))); break;
    case Phase::Value: integers(0, kCanvasSize); break;
    case Phase::GroupClose: out.push_back(close_); break;
    case Phase::End: out.push_back(Vocabulary::kEos); break;
    case Phase::Done: break;
  }
}

std::vector<int> TokenGrammar::next_allowed_tokens(const GrammarState& state) const {
  if (state.terminal()) throw Error(ErrorCode::TerminalState, "grammar state is terminal");
  std::vector<int> out;
  candidates(state, out);
  // Only branching phases can change the completion length.
  const bool branching = state.phase == Phase::AnnotationType || state.phase == Phase::Count ||
                         state.phase == Phase::Keypoints || state.phase == Phase::Body;
  if (branching && options_.max_symbols > 0) {
    std::erase_if(out, [&](int id) { return !accepts(state, id); });
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace layoutprior
