#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "layoutprior/constraint.hpp"
#include "layoutprior/error.hpp"
#include "layoutprior/grammar.hpp"
#include "layoutprior/tokenizer.hpp"

using namespace layoutprior;

namespace {

const std::string kBoxExample =
    "box; multiple instances; large; 3; 0; person, motorcycle, bicycle; [ xmin 377 ymin 250 xmax 406 ymax 288] "
    "[ xmin 287 ymin 228 xmax 377 ymax 399] [ xmin 388 ymin 258 xmax 413 ymax 286]";
const std::string kTbExample =
    "box; multiple instances; large; 3; 0; [ keyboard xmin 0 ymin 268 xmax 512 ymax 384 ] [ dining table xmin 0 "
    "ymin 95 xmax 512 ymax 442 ] [ cup xmin 97 ymin 82 xmax 503 ymax 443 ]";
const std::string kCastle = "box; object centric; large; 1; 0; castle; [ xmin 236 ymin 142 xmax 413 ymax 232]";
const std::string kPose18 =
    "key point; multiple instances; large; 1; 18; person; [ a 190 120 b 266 146 c 318 143 d 385 232 e 338 269 f 214 "
    "150 g 0 0 h 0 0 i 312 280 j 365 296 k 359 420 l 258 283 m 194 344 n 301 383 o 197 100 p 181 103 q 234 84 r 0 0]";
const std::string kPose14 =
    "key point; multiple instances; large; 2; 14; person, person; [ a 240 178 b 304 168 c 228 239 d 0 0 e 261 236 f "
    "0 0 g 251 296 h 289 296 i 0 0 j 0 0 k 0 0 l 0 0 m 261 92 n 272 156] [ a 314 160 b 363 158 c 274 232 d 356 264 e "
    "224 260 f 271 263 g 298 315 h 341 324 i 0 0 j 332 442 k 0 0 l 0 0 m 287 64 n 333 133]";
const std::string kClock =
    "mask; multiple instances; medium; 1; 0; clock; [ m0 224 291 m1 226 299 m2 227 306 m3 228 313 m4 233 320 m5 238 "
    "325 m6 245 329 m7 252 332 m8 259 334 m9 266 335 m10 274 333 m11 281 330 m12 288 327 m13 293 323 m14 299 318 m15 "
    "303 312 m16 305 305 m17 307 298 m18 310 291 m19 308 284 m20 307 276 m21 303 269 m22 299 263 m23 295 257 m24 288 "
    "254 m25 280 251 m26 273 250 m27 266 249 m28 259 249 m29 252 251 m30 246 256 m31 240 260 m32 235 265 m33 229 270 "
    "m34 227 277 m35 225 284]";

std::vector<std::string> corpus_of_examples() { return {kBoxExample, kTbExample, kCastle, kPose18, kPose14, kClock}; }

SceneRecord three_boxes() {
  SceneRecord r;
  r.size_flag = SizeFlag::Large;
  r.instances = {{"person", Box{377, 250, 406, 288}}, {"motorcycle", Box{287, 228, 377, 399}},
                 {"bicycle", Box{388, 258, 413, 286}}};
  return r;
}

std::set<int> ids_of(const Vocabulary& v, std::initializer_list<const char*> words) {
  std::set<int> out;
  for (const char* w : words) out.insert(v.id(w));
  return out;
}

}  // namespace

TEST_CASE("three-person box example parses into three boxes") {
  const ParseResult r = parse(kBoxExample);
  REQUIRE(r.report.format_ok);
  REQUIRE(r.report.matching_ok);
  REQUIRE(r.record);
  CHECK(r.record->instances.size() == 3);
  CHECK(r.record->instances[0].category == "person");
  CHECK(std::get<Box>(r.record->instances[1].geometry) == Box{287, 228, 377, 399});
  CHECK(r.report.templ == Template::A);
}

TEST_CASE("in-order serialization reproduces the example text") {
  CHECK(serialize_in_order(three_boxes(), Template::A).text == kBoxExample);
  SceneRecord castle;
  castle.data_type = DataType::ObjectCentric;
  castle.instances = {{"castle", Box{236, 142, 413, 232}}};
  CHECK(serialize_in_order(castle, Template::A).text == kCastle);
}

TEST_CASE("template b interleaves categories and accepts a space before the closing bracket") {
  const ParseResult r = parse(kTbExample);
  REQUIRE(r.record);
  CHECK(r.report.templ == Template::B);
  CHECK(r.record->instances[1].category == "dining table");
  const std::string canon = serialize_in_order(*r.record, Template::B).text;
  CHECK(canon.find("[ keyboard xmin 0 ymin 268 xmax 512 ymax 384]") != std::string::npos);
  CHECK(canon.find("; [ keyboard") != std::string::npos);
  CHECK(same_scene(*parse(canon).record, *r.record));
}

TEST_CASE("pose and mask examples parse") {
  for (const std::string& s : {kPose18, kPose14, kClock}) {
    const ParseResult r = parse(s);
    INFO(s);
    REQUIRE(r.record);
    CHECK(serialize_in_order(*r.record, *r.report.templ).text == s);
  }
  const SceneRecord pose = *parse(kPose18).record;
  CHECK(pose.n_keypoints == 18);
  const auto& joints = std::get<Keypoints>(pose.instances[0].geometry).joints;
  CHECK(joints[6] == Point{0, 0});
  CHECK_FALSE(joints[6].visible());
  CHECK(std::get<MaskContour>(parse(kClock).record->instances[0].geometry).points.size() == 36);
}

TEST_CASE("declared count mismatch is a matching failure") {
  const ParseResult r = parse("box; multiple instances; large; 2; 0; person; [ xmin 1 ymin 1 xmax 2 ymax 2]");
  CHECK(r.report.format_ok);
  CHECK_FALSE(r.report.matching_ok);
  CHECK_FALSE(r.record);
  REQUIRE_FALSE(r.report.violations.empty());
}

TEST_CASE("keypoint group with the wrong pair count is a matching failure") {
  const ParseResult r = parse("key point; multiple instances; large; 1; 14; person; [ a 1 1 b 2 2]");
  CHECK_FALSE(r.report.matching_ok);
}

TEST_CASE("empty and junk strings fail format without throwing") {
  for (const char* s : {"", ";", "box", "box;", "[ ]", "box; multiple instances; large; 1; 0; x; [ xmin 1 ymin 1 xmax 2",
                        "box; multiple instances; huge; 1; 0; x; [ xmin 1 ymin 1 xmax 2 ymax 2]",
                        "box; multiple instances; large; 1; 0; x; [ xmin 513 ymin 1 xmax 2 ymax 2]",
                        "box; multiple instances; large; 1; 0; x; [ xmin 01 ymin 1 xmax 2 ymax 2]"}) {
    INFO(s);
    const ParseResult r = parse(s);
    CHECK_FALSE(r.report.format_ok);
    CHECK_FALSE(r.report.matching_ok);
  }
}

TEST_CASE("closed category set turns unknown names into matching failures") {
  GrammarOptions opt;
  opt.closed_categories = std::set<std::string>{"person", "motorcycle"};
  const ParseResult r = parse(kBoxExample, opt);
  CHECK(r.report.format_ok);
  CHECK_FALSE(r.report.matching_ok);
  CHECK(parse(kBoxExample).report.matching_ok);
}

TEST_CASE("round trip over random records of every type and template") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    const SceneRecord rec = fixtures::random_scene(rng, fixtures::random_type(rng));
    const Template t = i % 2 ? Template::B : Template::A;
    const SequenceText s = serialize(rec, t, rng());
    const ParseResult r = parse(s.text);
    REQUIRE_MESSAGE(r.record, s.text);
    CHECK(r.report.format_ok);
    CHECK(r.report.matching_ok);
    CHECK(same_scene(*r.record, rec));
  }
}

TEST_CASE("serialization order is a seed-deterministic permutation") {
  std::mt19937_64 rng(3);
  const SceneRecord rec = fixtures::random_scene(rng, AnnotationType::Box, 8);
  CHECK(serialize(rec, Template::A, 5).text == serialize(rec, Template::A, 5).text);
  std::set<std::string> variants;
  for (std::uint64_t s = 0; s < 20; ++s) variants.insert(serialize(rec, Template::A, s).text);
  if (rec.instances.size() > 2) CHECK(variants.size() > 1);
}

TEST_CASE("mixed geometry in one scene is rejected") {
  SceneRecord rec = three_boxes();
  rec.instances.push_back({"clock", MaskContour{std::vector<Point>(36, Point{1, 1})}});
  CHECK_THROWS_AS(serialize(rec, Template::A, 0), Error);
}

TEST_CASE("special words off drops coordinate keywords") {
  GrammarOptions opt;
  opt.special_words = false;
  const std::string s = serialize_in_order(three_boxes(), Template::A, opt).text;
  CHECK(s.find("xmin") == std::string::npos);
  CHECK(s.find("[ 377 250 406 288]") != std::string::npos);
  const ParseResult r = parse(s, opt);
  REQUIRE(r.record);
  CHECK(same_scene(*r.record, three_boxes()));
}

TEST_CASE("parser survives random bytes and shuffled symbols") {
  std::mt19937_64 rng(99);
  const std::string alphabet = "box;,[] 0123456789xminymaxkeypoint mask person\n\t\xff";
  for (int i = 0; i < 3000; ++i) {
    std::string s(rng() % 200, ' ');
    for (char& c : s) c = i % 2 ? static_cast<char>(rng() & 0xff) : alphabet[rng() % alphabet.size()];
    const ParseResult r = parse(s);
    CHECK((r.report.format_ok || !r.report.matching_ok));
  }
  for (int i = 0; i < 500; ++i) {
    std::vector<Lexeme> lx = lex(kBoxExample);
    std::vector<std::string> words;
    for (const auto& l : lx) words.emplace_back(l.text);
    const auto a = rng() % words.size(), b = rng() % words.size();
    std::swap(words[a], words[b]);
    std::string s;
    for (const auto& w : words) s += w + " ";
    const ParseResult r = parse(s);
    CHECK((r.report.format_ok || !r.report.matching_ok));
  }
}

TEST_CASE("init state expects an annotation type in both templates") {
  const Vocabulary v = Vocabulary::build(corpus_of_examples());
  const TokenGrammar g(v);
  const auto expect = ids_of(v, {"box", "key point", "mask"});
  for (auto t : {TemplateChoice::A, TemplateChoice::B, TemplateChoice::Either}) {
    const auto allowed = g.next_allowed_tokens(g.init_state(t));
    CHECK(std::set<int>(allowed.begin(), allowed.end()) == expect);
  }
  GrammarState s = g.advance(g.init_state(), v.id("mask"));
  s = g.advance(s, v.id(";"));
  const auto allowed = g.next_allowed_tokens(s);
  CHECK(std::set<int>(allowed.begin(), allowed.end()) == ids_of(v, {"object centric", "multiple instances"}));
}

TEST_CASE("allowed sets at size, coordinate, group end and sentence end") {
  const Vocabulary v = Vocabulary::build(corpus_of_examples());
  const TokenGrammar g(v);
  auto consume_text = [&](const std::string& text) {
    const EncodeResult e = encode_symbols(text, v);
    REQUIRE(e.unk_count == 0);
    return g.consume(g.init_state(), e.ids);
  };
  GrammarState s = consume_text("box; multiple instances;");
  auto allowed = g.next_allowed_tokens(s);
  CHECK(std::set<int>(allowed.begin(), allowed.end()) == ids_of(v, {"small", "medium", "large"}));

  s = consume_text("box; multiple instances; large; 3; 0; person, motorcycle, bicycle; [ xmin");
  allowed = g.next_allowed_tokens(s);
  CHECK(allowed.size() == kCanvasSize + 1);
  for (int id : allowed) CHECK(v.integer_value(id).has_value());

  s = consume_text("box; multiple instances; large; 3; 0; person, motorcycle, bicycle; [ xmin 377 ymin 250 xmax 406 ymax");
  s = g.advance(s, v.id("288"));
  allowed = g.next_allowed_tokens(s);
  CHECK(allowed == std::vector<int>{v.id("]")});

  s = consume_text("box; multiple instances; large; 3; 0; person, motorcycle, bicycle");
  s = g.advance(s, v.id(";"));
  CHECK(s.phase == Phase::GroupOpen);

  s = consume_text(kBoxExample);
  CHECK(g.next_allowed_tokens(s) == std::vector<int>{Vocabulary::kEos});
  s = g.advance(s, Vocabulary::kEos);
  CHECK(s.terminal());
  CHECK_THROWS_AS(g.next_allowed_tokens(s), Error);
}

TEST_CASE("first token advances into the data-type field and illegal tokens throw") {
  const Vocabulary v = Vocabulary::build(corpus_of_examples());
  const TokenGrammar g(v);
  const GrammarState s = g.advance(g.init_state(), v.id("box"));
  CHECK(s.phase == Phase::AfterAnnotationType);
  CHECK_THROWS_AS(g.advance(g.init_state(), v.id("person")), Error);
  try {
    g.advance(g.init_state(), v.id("person"));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IllegalToken);
  }
}

TEST_CASE("every serialized line is accepted token by token") {
  std::mt19937_64 rng(5);
  std::vector<std::string> lines;
  for (int i = 0; i < 300; ++i) {
    lines.push_back(serialize(fixtures::random_scene(rng, fixtures::random_type(rng)), i % 2 ? Template::B : Template::A,
                              rng())
                        .text);
  }
  const Vocabulary v = Vocabulary::build(lines);
  const TokenGrammar g(v);
  for (const std::string& line : lines) {
    const EncodeResult e = encode_symbols(line, v);
    GrammarState s = g.init_state();
    for (int id : e.ids) {
      REQUIRE_MESSAGE(g.accepts(s, id), line);
      s = g.advance(s, id);
    }
    CHECK(g.accepts(s, Vocabulary::kEos));
  }
}

TEST_CASE("random walks through the automaton always parse") {
  std::mt19937_64 rng(17);
  std::vector<std::string> lines;
  for (int i = 0; i < 100; ++i) lines.push_back(serialize(fixtures::random_scene(rng, fixtures::random_type(rng)), Template::A, rng()).text);
  const Vocabulary v = Vocabulary::build(lines);
  for (int budget : {0, 120, 255}) {
    ConstraintOptions opt;
    opt.max_symbols = budget;
    opt.max_instances = 12;
    const TokenGrammar g(v, opt);
    for (int walk = 0; walk < 300; ++walk) {
      GrammarState s = g.init_state();
      std::vector<int> ids;
      while (true) {
        const auto allowed = g.next_allowed_tokens(s);
        REQUIRE_FALSE(allowed.empty());
        const int tok = allowed[rng() % allowed.size()];
        s = g.advance(s, tok);
        if (tok == Vocabulary::kEos) break;
        ids.push_back(tok);
      }
      if (budget > 0) CHECK(static_cast<int>(ids.size()) + 1 <= budget);
      const std::string text = decode(ids, v);
      const ParseResult r = parse(text);
      REQUIRE_MESSAGE(r.record, text);
    }
  }
}

TEST_CASE("category restriction limits category positions") {
  const Vocabulary v = Vocabulary::build(corpus_of_examples());
  ConstraintOptions opt;
  opt.categories = std::vector<std::string>{"person"};
  const TokenGrammar g(v, opt);
  const EncodeResult e = encode_symbols("box; multiple instances; large; 2; 0;", v);
  const GrammarState s = g.consume(g.init_state(TemplateChoice::A), e.ids);
  const auto allowed = g.next_allowed_tokens(s);
  CHECK(allowed == std::vector<int>{v.id("person")});
}
