#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "layoutprior/checkpoint.hpp"
#include "layoutprior/commands.hpp"
#include "layoutprior/config.hpp"
#include "layoutprior/evalsuite.hpp"
#include "layoutprior/grammar.hpp"
#include "layoutprior/layout_io.hpp"
#include "layoutprior/sampler.hpp"
#include "layoutprior/synthetic.hpp"
#include "layoutprior/train.hpp"
#include "oracles.hpp"

using namespace layoutprior;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Options {
  std::set<int> only;
  std::uint64_t seed = 2024;
  fs::path work = fs::temp_directory_path() / "layoutprior_acceptance";
  std::int64_t prior_steps = 8000;
  std::int64_t memo_steps = 20000;
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void note(const std::string& msg) { std::cerr << "  " << msg << "\n" << std::flush; }

bool same_flags(const SceneRecord& a, const SceneRecord& b) {
  return a.annotation_type == b.annotation_type && a.data_type == b.data_type && a.size_flag == b.size_flag &&
         a.n_keypoints == b.n_keypoints && a.instances.size() == b.instances.size();
}

Outcome grammar_round_trip(const Options& o) {
  const auto start = Clock::now();
  std::mt19937_64 rng(derive_seed(o.seed, "round-trip"));
  std::size_t in_order = 0, permuted = 0, format_ok = 0, matching_ok = 0;
  std::map<AnnotationType, std::size_t> per_type;
  std::map<Template, std::size_t> per_template;
  const std::size_t total = 10000;
  for (std::size_t i = 0; i < total; ++i) {
    const auto type = static_cast<AnnotationType>(i % 3);
    const Template t = (i / 3) % 2 ? Template::B : Template::A;
    const SceneRecord rec = fixtures::random_scene(rng, type);
    const ParseResult exact = parse(serialize_in_order(rec, t).text);
    const ParseResult shuffled = parse(serialize(rec, t, rng()).text);
    for (const ParseResult* r : {&exact, &shuffled}) {
      if (r->report.format_ok) ++format_ok;
      if (r->report.matching_ok) ++matching_ok;
    }
    if (exact.record && same_flags(*exact.record, rec) && exact.record->instances == rec.instances) ++in_order;
    if (shuffled.record && same_flags(*shuffled.record, rec) &&
        std::is_permutation(shuffled.record->instances.begin(), shuffled.record->instances.end(),
                            rec.instances.begin())) {
      ++permuted;
    }
    ++per_type[type];
    ++per_template[t];
  }
  const double secs = seconds_since(start);
  return {in_order == total && permuted == total && format_ok == 2 * total && matching_ok == 2 * total && secs < 60.0,
          fmt::format("in-order identity {}/{}, permuted identity up to instance order {}/{}, format {}/{}, matching "
                      "{}/{} (box {}, keypoint {}, mask {}; template a {}, b {}), {:.1f} s < 60 s",
                      in_order, total, permuted, total, format_ok, 2 * total, matching_ok, 2 * total,
                      per_type[AnnotationType::Box], per_type[AnnotationType::Keypoint],
                      per_type[AnnotationType::Mask], per_template[Template::A], per_template[Template::B], secs)};
}

Outcome constrained_soundness(const Options& o) {
  const auto start = Clock::now();
  std::mt19937_64 rng(derive_seed(o.seed, "walk-vocab"));
  std::vector<std::string> lines;
  for (int i = 0; i < 300; ++i) {
    lines.push_back(serialize(fixtures::random_scene(rng, fixtures::random_type(rng)), Template::A, rng()).text);
  }
  const Vocabulary vocab = Vocabulary::build(lines);
  ModelConfig mc;
  mc.vocab_size = vocab.size();
  mc.context = 256;
  mc.layers = 1;
  mc.heads = 2;
  mc.embed_dim = 32;
  mc.seed = derive_seed(o.seed, "walk-init");
  const Parameters<float> params = Parameters<float>::init(mc);
  SampleOptions so;
  so.constrained = true;
  so.top_k = 0;
  so.max_tokens = 256;
  so.seed = derive_seed(o.seed, "walks");
  std::vector<PromptRequest> reqs(10000);
  const auto samples = batch_sample(params, vocab, reqs, so);
  std::vector<std::string> texts;
  std::size_t terminated = 0;
  std::map<std::string, std::size_t> types;
  for (const auto& s : samples) {
    texts.push_back(s.result.text);
    if (s.result.terminated) ++terminated;
    types[s.result.text.substr(0, s.result.text.find(';'))]++;
  }
  const QualityMetrics q = quality_metrics(texts);
  const double secs = seconds_since(start);
  return {q.format_ok == q.total && q.matching_ok == q.total && terminated == q.total && secs < 300.0,
          fmt::format("format {}/{}, matching {}/{}, terminated {} (box {}, key point {}, mask {}), {:.1f} s < 300 s",
                      q.format_ok, q.total, q.matching_ok, q.total, terminated, types["box"], types["key point"],
                      types["mask"], secs)};
}

Outcome gradient_correctness(const Options& o) {
  const auto start = Clock::now();
  ModelConfig c;
  c.vocab_size = 50;
  c.context = 12;
  c.layers = 1;
  c.heads = 2;
  c.embed_dim = 16;
  c.seed = derive_seed(o.seed, "grad-init");
  std::mt19937_64 rng(derive_seed(o.seed, "grad-data"));
  std::vector<TokenSeq> seqs;
  for (int i = 0; i < 3; ++i) {
    TokenSeq s{Vocabulary::kBos};
    const int n = 4 + static_cast<int>(rng() % 7);
    for (int j = 0; j < n; ++j) s.push_back(4 + static_cast<int>(rng() % 46));
    s.push_back(Vocabulary::kEos);
    seqs.push_back(s);
  }
  const auto report = oracles::gradient_check(c, make_batch(seqs));
  std::string worst;
  double worst_err = -1.0;
  for (const auto& [name, err] : report.per_tensor) {
    if (err > worst_err) worst_err = err, worst = name;
  }
  const double secs = seconds_since(start);
  return {report.max_error < 1e-4 && secs < 120.0,
          fmt::format("max relative error {:.3e} < 1e-4 over {} tensors (worst {}), {:.1f} s < 120 s",
                      report.max_error, report.per_tensor.size(), worst, secs)};
}

std::vector<std::string> toy_corpus(std::uint64_t seed) {
  const std::vector<std::string> pool{"person", "car", "dog", "kite", "chair", "horse", "bus", "cup"};
  std::mt19937_64 rng(seed);
  std::set<std::string> prefixes;
  std::vector<std::string> lines;
  while (lines.size() < 200) {
    SceneRecord rec;
    const int n = 6 + static_cast<int>(rng() % 4);
    for (int i = 0; i < n; ++i) rec.instances.push_back({pool[rng() % pool.size()], fixtures::random_box(rng)});
    rec.data_type = DataType::MultipleInstances;
    rec.size_flag = classify_size(rec.instances);
    std::string line = serialize(rec, Template::A, rng()).text;
    std::size_t cut = 0;
    for (int k = 0; k < 6; ++k) cut = line.find(';', cut) + 1;
    if (prefixes.insert(line.substr(0, cut)).second) lines.push_back(std::move(line));
  }
  return lines;
}

std::string flag_prefix(const std::string& line) {
  std::size_t cut = 0;
  for (int k = 0; k < 6; ++k) cut = line.find(';', cut) + 1;
  return line.substr(0, cut);
}

Outcome memorization(const Options& o) {
  const auto start = Clock::now();
  const std::vector<std::string> lines = toy_corpus(derive_seed(o.seed, "toy"));
  const Vocabulary vocab = Vocabulary::build(lines);
  std::vector<TokenSeq> seqs;
  int longest = 0;
  for (const auto& l : lines) {
    seqs.push_back(encode(l, vocab).ids);
    longest = std::max(longest, static_cast<int>(seqs.back().size()));
  }
  ModelConfig mc;
  mc.vocab_size = vocab.size();
  mc.context = longest;
  mc.layers = 2;
  mc.heads = 4;
  mc.embed_dim = 128;
  mc.dropout = 0.0;
  mc.seed = derive_seed(o.seed, "memo-init");
  TrainConfig tc;
  tc.learning_rate = 1e-3;
  tc.batch_size = 32;
  tc.total_steps = o.memo_steps;
  TrainState state(Parameters<float>::init(mc), derive_seed(o.seed, "memo-dropout"));
  BatchLoader loader(seqs, tc.batch_size, derive_seed(o.seed, "memo-batches"));
  const Batch all = make_batch(seqs);

  auto reproduced = [&] {
    SampleOptions so;
    so.greedy = true;
    so.max_tokens = mc.context;
    std::size_t hits = 0;
    for (const auto& l : lines) {
      if (sample(state.model.params(), vocab, flag_prefix(l), so).text == l) ++hits;
    }
    return hits;
  };

  double nll = state.model.loss(all);
  std::int64_t nll_step = -1;
  std::size_t hits = 0;
  while (state.step < tc.total_steps) {
    train_step(state, loader.next(), tc);
    if (state.step % 250 != 0) continue;
    nll = state.model.loss(all);
    if (nll < 0.1 && nll_step < 0) nll_step = state.step;
    if (state.step % 1000 == 0) note(fmt::format("memorization: step {} nll {:.4f}", state.step, nll));
    if (nll_step >= 0 && state.step % 500 == 0) {
      hits = reproduced();
      note(fmt::format("memorization: step {} greedy reproduction {}/200", state.step, hits));
      if (hits >= 190) break;
    }
    if (seconds_since(start) > 1800.0) break;
  }
  nll = state.model.loss(all);
  if (nll_step >= 0) hits = reproduced();
  const double secs = seconds_since(start);
  return {nll < 0.1 && hits >= 190 && secs < 1800.0,
          fmt::format("nll {:.4f} nats/token < 0.1 (first below at step {}), greedy reproduction {}/200 = {:.1f}% >= "
                      "95%, {} steps, {:.0f} s < 1800 s",
                      nll, nll_step, hits, 100.0 * static_cast<double>(hits) / 200.0, state.step, secs)};
}

struct PriorRun {
  bool ready = false;
  RunConfig config;
  std::vector<SceneRecord> generator;
  std::optional<LoadedCheckpoint> checkpoint;
  Vocabulary vocab;
  double train_seconds = 0.0;
  SampleOptions sampling;
};

PriorRun& prior_run(const Options& o) {
  static PriorRun run;
  if (run.ready) return run;
  const auto start = Clock::now();
  const fs::path dir = o.work / "prior";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string text = fmt::format(R"([run]
seed = {}
out = out
[dataset.shapes]
source = synthetic
scenes = 5000
[model]
context = 160
layers = 2
heads = 4
embed_dim = 128
dropout = 0
[train]
steps = {}
batch_size = 32
learning_rate = 0.001
checkpoint_every = 1000
[sample]
max_tokens = 160
constrained = true
top_k = 0
)",
                                       o.seed, o.prior_steps);
  std::ofstream(dir / "run.ini") << text;
  run.config = load_config(dir / "run.ini");
  std::ostringstream log;
  cmd_ingest(run.config, log);
  cmd_train(run.config, {}, std::cerr);
  run.train_seconds = seconds_since(start);
  run.vocab = Vocabulary::load(run.config.out_dir / outputs::kVocab);
  run.checkpoint.emplace(load_checkpoint(run.config.out_dir / outputs::kCheckpoints / outputs::kLatest,
                                         run.vocab.size()));
  run.generator = synthetic_scenes({}, 20000, derive_seed(o.seed, "generator-prior"));
  run.sampling = run.config.sample.options;
  run.sampling.categories = std::vector<std::string>{"A", "B"};
  run.ready = true;
  return run;
}

struct PriorEval {
  EvalResult model;
  EvalResult uniform;
  double seconds = 0.0;
};

PriorEval& prior_eval(const Options& o) {
  static std::optional<PriorEval> cached;
  if (cached) return *cached;
  PriorRun& run = prior_run(o);
  const auto start = Clock::now();
  EvalOptions eo;
  eo.samples = 1000;
  eo.min_per_category = 1;
  eo.max_rounds = 1;
  eo.strict = false;
  ModelSource source(run.checkpoint->state.model.params(), run.vocab, run.sampling);
  PriorEval e;
  e.model = evaluate(source, run.generator, {"A", "B"}, eo, derive_seed(o.seed, "eval"));
  UniformSource uniform({"A", "B"});
  e.uniform = evaluate(uniform, run.generator, {"A", "B"}, eo, derive_seed(o.seed, "eval"));
  e.seconds = seconds_since(start);
  const fs::path dir = run.config.out_dir / "eval";
  fs::create_directories(dir);
  std::ofstream(dir / "report.txt") << e.model.report.to_text();
  std::ofstream(dir / "uniform_report.txt") << e.uniform.report.to_text();
  write_lines(dir / "samples.txt", e.model.sequences);
  write_priors(dir, "truth", e.model.truth);
  write_priors(dir, "model", e.model.model);
  cached = std::move(e);
  return *cached;
}

std::string per_category(const EvalReport& r) {
  std::string out;
  for (const auto& row : r.per_category) {
    auto f = [](const std::optional<double>& v) { return v ? fmt::format("{:.4f}", *v) : std::string("undefined"); };
    out += fmt::format("; {}: location {} shape {} relation {}", row.category, f(row.location), f(row.shape),
                       f(row.relation));
  }
  return out;
}

Outcome prior_recovery(const Options& o) {
  PriorRun& run = prior_run(o);
  const PriorEval& e = prior_eval(o);
  const EvalReport& m = e.model.report;
  bool ok = m.skipped.empty() && m.per_category.size() == 2;
  for (const auto& row : m.per_category) {
    ok = ok && row.location && *row.location < 0.15 && row.shape && *row.shape < 0.15 && row.relation &&
         *row.relation < 0.15;
  }
  const EvalReport& u = e.uniform.report;
  const double uniform_worst =
      std::max({u.location_kl.value_or(0.0), u.shape_kl.value_or(0.0), u.relation_kl.value_or(0.0)});
  const double secs = run.train_seconds + e.seconds;
  return {ok && uniform_worst > 0.5 && secs < 3600.0,
          fmt::format("{} samples ({} valid){}; uniform baseline location {:.4f} shape {:.4f} relation {:.4f} (max "
                      "{:.4f} > 0.5); {} steps, {:.0f} s < 3600 s",
                      m.sequences, m.valid_sequences, per_category(m), u.location_kl.value_or(NAN),
                      u.shape_kl.value_or(NAN), u.relation_kl.value_or(NAN), uniform_worst,
                      run.config.train.optimizer.total_steps, secs)};
}

Outcome controllability(const Options& o) {
  const PriorEval& e = prior_eval(o);
  const ControllabilityMetrics& c = e.model.report.control;
  std::map<std::string, std::pair<int, int>> by_size;
  for (std::size_t i = 0; i < e.model.sequences.size(); ++i) {
    const ParseResult p = parse(e.model.sequences[i]);
    auto& slot = by_size[std::string(to_string(*e.model.requests[i].size))];
    ++slot.second;
    if (p.record && classify_size(p.record->instances) == e.model.requests[i].size) ++slot.first;
  }
  std::string sizes;
  for (const auto& [name, v] : by_size) sizes += fmt::format(", {} {}/{}", name, v.first, v.second);
  return {c.size_accuracy() > 0.85 && c.count_accuracy() > 0.95,
          fmt::format("size accuracy {:.2f}% > 85%, count accuracy {:.2f}% > 95% over {} prompts{}",
                      100.0 * c.size_accuracy(), 100.0 * c.count_accuracy(), c.total, sizes)};
}

Outcome monotonicity(const Options& o) {
  PriorRun& run = prior_run(o);
  const auto start = Clock::now();
  const std::vector<int> counts{40, 80, 120};
  std::vector<double> mean(counts.size(), 0.0);
  std::string rows;
  ModelSource source(run.checkpoint->state.model.params(), run.vocab, run.sampling);
  for (int s = 0; s < 5; ++s) {
    rows += fmt::format(" seed {}:", s);
    for (std::size_t k = 0; k < counts.size(); ++k) {
      EvalOptions eo;
      eo.samples = 2 * counts[k];
      eo.min_per_category = counts[k];
      eo.max_rounds = 4;
      eo.strict = false;
      const EvalResult r =
          evaluate(source, run.generator, {"A", "B"}, eo, derive_seed(o.seed, fmt::format("monotone.{}.{}", s, k)));
      const double kl = 0.5 * (r.report.location_kl.value_or(NAN) + r.report.shape_kl.value_or(NAN));
      mean[k] += kl / 5.0;
      rows += fmt::format(" {:.4f}", kl);
    }
  }
  const bool ok = mean[0] > mean[1] && mean[1] > mean[2];
  return {ok, fmt::format("mean of location and shape KL over 5 seeds at 40/80/120 samples per category: {:.4f} > "
                          "{:.4f} > {:.4f};{}; {:.0f} s",
                          mean[0], mean[1], mean[2], rows, seconds_since(start))};
}

Outcome metric_oracles(const Options& o) {
  std::vector<std::string> failures;
  const double kl = kl_divergence(std::vector<double>{0.5, 0.5}, std::vector<double>{0.25, 0.75});
  if (std::abs(kl - 0.1438) > 1e-4) failures.push_back(fmt::format("kl {:.6f}", kl));

  std::mt19937_64 rng(derive_seed(o.seed, "relation-fixtures"));
  const auto& cats = fixtures::category_pool();
  int relation_exact = 0;
  for (int t = 0; t < 20; ++t) {
    std::vector<SceneRecord> recs;
    const int n = 1 + static_cast<int>(rng() % 30);
    for (int i = 0; i < n; ++i) recs.push_back(fixtures::random_scene(rng, fixtures::random_type(rng)));
    std::vector<double> brute(cats.size() * cats.size(), 0.0);
    for (const auto& r : recs) {
      for (std::size_t i = 0; i < cats.size(); ++i) {
        for (std::size_t j = 0; j < cats.size(); ++j) {
          bool hi = false, hj = false;
          for (const auto& inst : r.instances) {
            hi = hi || inst.category == cats[i];
            hj = hj || inst.category == cats[j];
          }
          if (i != j && hi && hj) brute[i * cats.size() + j] += 1.0;
        }
      }
    }
    if (relation_prior(recs, cats).counts == brute) ++relation_exact;
  }
  if (relation_exact != 20) failures.push_back(fmt::format("relation {}/20", relation_exact));

  auto box = [](const std::string& cat, Box b) {
    SceneRecord r;
    r.instances.push_back({cat, b});
    return r;
  };
  const std::vector<SceneRecord> recs{box("A", {0, 0, 2, 2}), box("A", {1, 1, 3, 4}), box("B", {0, 0, 4, 4})};
  const double hand[16] = {1, 1, 0, 0, 1, 2, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0};
  const LocationPrior loc = location_prior(recs, "A", 4, 0.0, 4);
  int cells_exact = 0;
  for (int i = 0; i < 16; ++i) cells_exact += loc.cells[static_cast<std::size_t>(i)] == hand[i] / 10.0;
  if (cells_exact != 16) failures.push_back(fmt::format("location {}/16 cells", cells_exact));

  std::string f;
  for (const auto& x : failures) f += " " + x;
  return {failures.empty(), fmt::format("kl {:.6f} (0.1438 +- 1e-4), relation exact on {}/20 fixtures, location "
                                        "exact on {}/16 cells{}",
                                        kl, relation_exact, cells_exact, failures.empty() ? "" : "; failed:" + f)};
}

Outcome determinism(const Options& o) {
  const std::string text = fmt::format(R"([run]
seed = {}
out = out
[dataset.shapes]
source = synthetic
scenes = 300
[corpus]
templates = a+b
[model]
context = 160
layers = 1
heads = 2
embed_dim = 32
[train]
steps = 30
batch_size = 8
checkpoint_every = 10
[sample]
count = 12
max_tokens = 160
constrained = true
)",
                                       o.seed);
  std::vector<RunConfig> runs;
  for (const char* name : {"determinism_a", "determinism_b"}) {
    const fs::path dir = o.work / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "run.ini") << text;
    runs.push_back(load_config(dir / "run.ini"));
    std::ostringstream log;
    cmd_ingest(runs.back(), log);
    cmd_train(runs.back(), {}, log);
    cmd_sample(runs.back(), {}, log);
  }
  std::vector<std::string> differing;
  for (const char* f : {outputs::kCorpus, outputs::kManifest, outputs::kVocab, outputs::kLossLog, outputs::kSamples,
                        outputs::kSidecar}) {
    if (slurp(runs[0].out_dir / f) != slurp(runs[1].out_dir / f)) differing.emplace_back(f);
  }
  if (slurp(checkpoint_path(runs[0], 30)) != slurp(checkpoint_path(runs[1], 30))) differing.emplace_back("checkpoint");

  const Vocabulary vocab = Vocabulary::load(runs[0].out_dir / outputs::kVocab);
  const LoadedCheckpoint ck = load_checkpoint(checkpoint_path(runs[0], 30), vocab.size());
  const fs::path copy = o.work / "determinism_a" / "resaved.ckpt";
  save_checkpoint(copy, ck.state, ck.loader_state);
  const LoadedCheckpoint again = load_checkpoint(copy, vocab.size());
  const auto lines = read_lines(runs[0].out_dir / outputs::kCorpus);
  std::vector<int> tokens;
  int seq = 0;
  for (int i = 0; i < 4; ++i) {
    const TokenSeq ids = encode(lines[static_cast<std::size_t>(i)], vocab).ids;
    seq = std::max(seq, static_cast<int>(ids.size()));
  }
  for (int i = 0; i < 4; ++i) {
    TokenSeq ids = encode(lines[static_cast<std::size_t>(i)], vocab).ids;
    ids.resize(static_cast<std::size_t>(seq), Vocabulary::kPad);
    tokens.insert(tokens.end(), ids.begin(), ids.end());
  }
  const auto a = forward<float>(ck.state.model.params(), tokens, 4, seq);
  const auto b = forward<float>(again.state.model.params(), tokens, 4, seq);
  const bool forward_same = a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
  const bool file_same = slurp(copy) == slurp(checkpoint_path(runs[0], 30));
  std::string diff;
  for (const auto& d : differing) diff += " " + d;
  return {differing.empty() && forward_same && file_same,
          fmt::format("two identical runs: corpus, manifest, vocab, loss log, samples, sidecar and checkpoint {}; "
                      "save/load forward over {} logits {}, re-saved checkpoint {}",
                      differing.empty() ? "byte-identical" : "differ:" + diff, a.size(),
                      forward_same ? "bit-identical" : "differs", file_same ? "byte-identical" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"acceptance checks"};
  std::vector<int> only;
  app.add_option("--only", only, "criteria to run (default: all)");
  app.add_option("--seed", o.seed, "global seed");
  app.add_option("--work", o.work, "scratch directory");
  app.add_option("--prior-steps", o.prior_steps, "training steps for the synthetic prior model");
  app.add_option("--memo-steps", o.memo_steps, "step budget for the memorization run");
  CLI11_PARSE(app, argc, argv);
  o.only = {only.begin(), only.end()};
  fs::create_directories(o.work);

  const std::vector<std::pair<std::string, std::function<Outcome(const Options&)>>> criteria{
      {"grammar round trip", grammar_round_trip},
      {"constrained decoding soundness", constrained_soundness},
      {"gradient correctness", gradient_correctness},
      {"memorization", memorization},
      {"synthetic prior recovery", prior_recovery},
      {"controllability", controllability},
      {"sample-count monotonicity", monotonicity},
      {"metric oracles", metric_oracles},
      {"determinism and persistence", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!o.only.empty() && !o.only.count(id)) continue;
    Outcome r;
    try {
      r = criteria[i].second(o);
    } catch (const std::exception& e) {
      r = {false, std::string("error: ") + e.what()};
    }
    if (!r.pass) ++failed;
    std::cout << fmt::format("criterion {} {}: {}: {}", id, r.pass ? "PASS" : "FAIL", criteria[i].first, r.detail)
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
