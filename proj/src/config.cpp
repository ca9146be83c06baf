#include "layoutprior/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "layoutprior/error.hpp"
#include "layoutprior/grammar.hpp"

namespace layoutprior {

namespace pt = boost::property_tree;

GrammarOptions CorpusConfig::grammar() const {
  GrammarOptions g;
  g.special_words = special_words;
  g.mask_points = mask_points;
  return g;
}

VocabularyOptions CorpusConfig::vocabulary() const {
  VocabularyOptions v;
  v.special_words = special_words;
  v.mask_points = mask_points;
  return v;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t global, std::string_view name) {
  return splitmix64(global ^ fnv1a(name));
}

namespace {

[[noreturn]] void usage(const std::string& msg) { throw Error(ErrorCode::Usage, "config: " + msg); }
[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::InvalidConfig, "config: " + msg); }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

// One INI section with key bookkeeping so unknown keys are reported.
class Section {
 public:
  Section(std::string name, const pt::ptree& tree, std::set<std::string> known)
      : name_(std::move(name)), tree_(&tree) {
    for (const auto& [key, value] : tree) {
      if (!value.empty()) usage(fmt::format("[{}] has a nested entry '{}'", name_, key));
      if (!known.count(key)) usage(fmt::format("[{}] has an unknown key '{}'", name_, key));
    }
  }

  std::optional<std::string> raw(const std::string& key) const {
    const auto it = tree_->find(key);
    if (it == tree_->not_found()) return std::nullopt;
    return trim(it->second.data());
  }

  template <class T>
  void get(const std::string& key, T& out) const {
    const auto v = raw(key);
    if (!v) return;
    out = convert<T>(key, *v);
  }

  template <class T>
  void get(const std::string& key, std::optional<T>& out) const {
    const auto v = raw(key);
    if (!v) return;
    out = convert<T>(key, *v);
  }

  std::string required(const std::string& key) const {
    const auto v = raw(key);
    if (!v) usage(fmt::format("[{}] needs '{}'", name_, key));
    return *v;
  }

 private:
  template <class T>
  T convert(const std::string& key, const std::string& v) const {
    auto fail = [&]() -> T { usage(fmt::format("[{}] {} = '{}' is not a valid value", name_, key, v)); };
    if constexpr (std::is_same_v<T, bool>) {
      if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
      if (v == "false" || v == "no" || v == "off" || v == "0") return false;
      return fail();
    } else if constexpr (std::is_same_v<T, std::string>) {
      return v;
    } else if constexpr (std::is_same_v<T, std::filesystem::path>) {
      return std::filesystem::path(v);
    } else {
      std::istringstream in(v);
      in.imbue(std::locale::classic());
      T out{};
      in >> out;
      if (!in || !in.eof()) return fail();
      if constexpr (std::is_unsigned_v<T>) {
        if (v.find('-') != std::string::npos) return fail();
      }
      return out;
    }
  }

  std::string name_;
  const pt::ptree* tree_;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

DatasetSpec parse_dataset(const std::string& name, const pt::ptree& tree, const std::filesystem::path& dir) {
  const Section s("dataset." + name, tree,
                  {"source", "path", "annotation", "data_type", "proportion", "scenes", "first", "second",
                   "cooccurrence", "aspect_sigma", "min_instances", "max_instances"});
  DatasetSpec d;
  d.name = name;
  const std::string source = s.raw("source").value_or("coco");
  if (source == "coco") {
    d.source = DatasetSource::Coco;
    d.path = s.required("path");
    if (d.path.is_relative()) d.path = dir / d.path;
    if (!std::filesystem::exists(d.path)) {
      throw Error(ErrorCode::Io, fmt::format("config: dataset '{}' path does not exist: {}", name, d.path.string()));
    }
  } else if (source == "synthetic") {
    d.source = DatasetSource::Synthetic;
    s.get("scenes", d.scenes);
    s.get("first", d.synthetic.first);
    s.get("second", d.synthetic.second);
    s.get("cooccurrence", d.synthetic.cooccurrence);
    s.get("aspect_sigma", d.synthetic.aspect_sigma);
    s.get("min_instances", d.synthetic.min_instances);
    s.get("max_instances", d.synthetic.max_instances);
  } else {
    usage(fmt::format("[dataset.{}] source must be coco or synthetic", name));
  }
  if (const auto a = s.raw("annotation")) {
    const auto t = parse_annotation_type(*a);
    if (!t) usage(fmt::format("[dataset.{}] unknown annotation '{}'", name, *a));
    d.annotation_type = *t;
  }
  if (const auto a = s.raw("data_type")) {
    const auto t = parse_data_type(*a);
    if (!t) usage(fmt::format("[dataset.{}] unknown data_type '{}'", name, *a));
    d.data_type = *t;
  }
  s.get("proportion", d.proportion);
  return d;
}

}  // namespace

void RunConfig::validate() const {
  if (datasets.empty()) invalid("at least one [dataset.<name>] section is required");
  double total = 0.0;
  for (const DatasetSpec& d : datasets) {
    if (!(d.proportion >= 0.0)) invalid(fmt::format("dataset '{}' proportion must be non-negative", d.name));
    total += d.proportion;
    if (d.source == DatasetSource::Synthetic) {
      if (d.scenes == 0) invalid(fmt::format("synthetic dataset '{}' needs scenes > 0", d.name));
      if (d.annotation_type != AnnotationType::Box) invalid(fmt::format("synthetic dataset '{}' only emits boxes", d.name));
      d.synthetic.validate();
    }
  }
  if (std::abs(total - 1.0) > 1e-6) invalid(fmt::format("dataset proportions sum to {}, not 1", total));
  if (corpus.mask_points < 3 || corpus.mask_points > kCanvasSize) invalid("corpus mask_points out of range");
  ModelConfig shape = model;
  shape.vocab_size = std::max(shape.vocab_size, 5);
  shape.validate();
  train.optimizer.validate();
  if (train.checkpoint_every < 0) invalid("train checkpoint_every must be non-negative");
  sample.options.validate();
  if (sample.count < 1) invalid("sample count must be positive");
  if (sample.options.max_tokens > model.context) invalid("sample max_tokens exceeds the model context");
  const EvalOptions& e = eval.options;
  if (e.grid < 1 || kCanvasSize % e.grid != 0) invalid("eval grid must divide the canvas size");
  if (e.bins < 1) invalid("eval bins must be positive");
  if (!(e.epsilon > 0.0)) invalid("eval epsilon must be positive");
  if (e.min_per_category < 1 || e.max_rounds < 1) invalid("eval min_per_category and max_rounds must be positive");
  if (e.min_instances < 2 || e.max_instances < e.min_instances) invalid("eval instance range must satisfy 2 <= min <= max");
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& config_dir) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    usage(fmt::format("line {}: {}", e.line(), e.message()));
  }

  RunConfig c;
  c.config_dir = config_dir;
  const pt::ptree empty;
  auto section = [&](const std::string& name) -> const pt::ptree& {
    const auto it = tree.find(name);
    return it == tree.not_found() ? empty : it->second;
  };
  for (const auto& [name, child] : tree) {
    if (child.empty() && !child.data().empty()) usage(fmt::format("key '{}' outside any section", name));
    static const std::set<std::string> known{"run", "corpus", "model", "train", "sample", "eval", "render"};
    if (name.rfind("dataset.", 0) == 0) {
      const std::string ds = name.substr(8);
      if (ds.empty()) usage("dataset section needs a name");
      c.datasets.push_back(parse_dataset(ds, child, config_dir));
    } else if (!known.count(name)) {
      usage(fmt::format("unknown section [{}]", name));
    }
  }

  {
    const Section s("run", section("run"), {"seed", "out"});
    s.get("seed", c.seed);
    s.get("out", c.out_dir);
  }
  if (c.out_dir.is_relative()) c.out_dir = config_dir / c.out_dir;
  {
    const Section s("corpus", section("corpus"), {"lines", "templates", "special_words", "mask_points"});
    s.get("lines", c.corpus.lines);
    const std::string t = s.raw("templates").value_or("a");
    if (t == "a") c.corpus.templates = TemplateMix::A;
    else if (t == "a+b") c.corpus.templates = TemplateMix::AB;
    else usage("[corpus] templates must be a or a+b");
    s.get("special_words", c.corpus.special_words);
    s.get("mask_points", c.corpus.mask_points);
  }
  {
    const Section s("model", section("model"), {"context", "layers", "heads", "embed_dim", "dropout"});
    s.get("context", c.model.context);
    s.get("layers", c.model.layers);
    s.get("heads", c.model.heads);
    s.get("embed_dim", c.model.embed_dim);
    s.get("dropout", c.model.dropout);
  }
  {
    const Section s("train", section("train"), {"learning_rate", "batch_size", "steps", "warmup_fraction", "beta1",
                                                "beta2", "epsilon", "clip_norm", "checkpoint_every", "number_embeddings"});
    TrainConfig& t = c.train.optimizer;
    s.get("learning_rate", t.learning_rate);
    s.get("batch_size", t.batch_size);
    s.get("steps", t.total_steps);
    s.get("warmup_fraction", t.warmup_fraction);
    s.get("beta1", t.beta1);
    s.get("beta2", t.beta2);
    s.get("epsilon", t.epsilon);
    s.get("clip_norm", t.clip_norm);
    s.get("checkpoint_every", c.train.checkpoint_every);
    std::string numbers = "sinusoidal";
    s.get("number_embeddings", numbers);
    if (numbers == "sinusoidal") {
      c.train.number_embeddings = NumberEmbeddings::Sinusoidal;
    } else if (numbers == "random") {
      c.train.number_embeddings = NumberEmbeddings::Random;
    } else {
      invalid("train number_embeddings must be 'sinusoidal' or 'random'");
    }
  }
  {
    const Section s("sample", section("sample"), {"temperature", "top_k", "top_p", "greedy", "max_tokens",
                                                  "constrained", "count", "checkpoint"});
    SampleOptions& o = c.sample.options;
    s.get("temperature", o.temperature);
    s.get("top_k", o.top_k);
    s.get("top_p", o.top_p);
    s.get("greedy", o.greedy);
    s.get("max_tokens", o.max_tokens);
    s.get("constrained", o.constrained);
    s.get("count", c.sample.count);
    s.get("checkpoint", c.sample.checkpoint);
    if (c.sample.checkpoint && c.sample.checkpoint->is_relative()) c.sample.checkpoint = config_dir / *c.sample.checkpoint;
  }
  {
    const Section s("eval", section("eval"), {"grid", "bins", "epsilon", "min_per_category", "samples", "max_rounds",
                                              "strict", "multiplicity", "min_instances", "max_instances", "categories"});
    EvalOptions& e = c.eval.options;
    s.get("grid", e.grid);
    s.get("bins", e.bins);
    s.get("epsilon", e.epsilon);
    s.get("min_per_category", e.min_per_category);
    s.get("samples", e.samples);
    s.get("max_rounds", e.max_rounds);
    s.get("strict", e.strict);
    s.get("multiplicity", e.multiplicity);
    s.get("min_instances", e.min_instances);
    s.get("max_instances", e.max_instances);
    if (const auto cats = s.raw("categories")) c.eval.categories = split_list(*cats);
    e.grammar = c.corpus.grammar();
  }
  {
    const Section s("render", section("render"), {"stroke_width", "font_size", "joint_radius"});
    s.get("stroke_width", c.render.stroke_width);
    s.get("font_size", c.render.font_size);
    s.get("joint_radius", c.render.joint_radius);
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read config file: " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), std::filesystem::absolute(path).parent_path());
}

}  // namespace layoutprior
