#include "layoutprior/commands.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "layoutprior/annotations.hpp"
#include "layoutprior/checkpoint.hpp"
#include "layoutprior/error.hpp"
#include "layoutprior/grammar.hpp"
#include "layoutprior/layout_io.hpp"
#include "layoutprior/render.hpp"
#include "layoutprior/synthetic.hpp"
#include "layoutprior/tokenizer.hpp"

namespace layoutprior {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

std::string file_slug(const std::string& name) {
  std::string out = name;
  for (char& ch : out) {
    if (!std::isalnum(static_cast<unsigned char>(ch))) ch = '_';
  }
  return out;
}

fs::path out_file(const RunConfig& c, const char* name) { return c.out_dir / name; }

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) throw Error(ErrorCode::Io, fmt::format("{} not found: {}", what, path.string()));
}

ordered_json stats_json(const IngestStats& s) {
  ordered_json j;
  j["images_seen"] = s.images_seen;
  j["images_kept"] = s.images_kept;
  j["images_without_instances"] = s.images_without_instances;
  j["instances_seen"] = s.instances_seen;
  j["instances_kept"] = s.instances_kept;
  j["dropped_crowd"] = s.dropped_crowd;
  j["dropped_few_keypoints"] = s.dropped_few_keypoints;
  j["dropped_unsupported"] = s.dropped_unsupported;
  j["dropped_degenerate"] = s.dropped_degenerate;
  return j;
}

// Largest-remainder apportionment; ties go to the earlier dataset.
std::vector<std::size_t> allocate(const std::vector<double>& proportions, std::size_t total) {
  std::vector<std::size_t> counts(proportions.size());
  std::vector<double> remainder(proportions.size());
  std::size_t used = 0;
  for (std::size_t i = 0; i < proportions.size(); ++i) {
    const double exact = proportions[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainder[i] = exact - static_cast<double>(counts[i]);
    used += counts[i];
  }
  std::vector<std::size_t> order(proportions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; used < total && k < order.size(); ++k, ++used) ++counts[order[k]];
  return counts;
}

// `count` indices into `available` items: whole seeded permutations, then a
// prefix of one more when the quota exceeds the pool.
std::vector<std::size_t> draw(std::size_t available, std::size_t count, std::mt19937_64& rng) {
  std::vector<std::size_t> out;
  out.reserve(count);
  std::vector<std::size_t> perm(available);
  while (out.size() < count) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t i = 0; i < available && out.size() < count; ++i) out.push_back(perm[i]);
  }
  return out;
}

Vocabulary load_vocab(const RunConfig& c) {
  const fs::path path = out_file(c, outputs::kVocab);
  require_file(path, "vocabulary (run ingest first)");
  return Vocabulary::load(path);
}

fs::path sample_checkpoint(const RunConfig& c) {
  const fs::path path = c.sample.checkpoint.value_or(c.out_dir / outputs::kCheckpoints / outputs::kLatest);
  require_file(path, "checkpoint (run train first)");
  return path;
}

std::vector<std::string> vocab_categories(const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (int id : vocab.category_ids()) out.push_back(vocab.token(id));
  return out;
}

std::vector<SceneRecord> parse_corpus(const std::vector<std::string>& lines, const GrammarOptions& grammar) {
  std::vector<SceneRecord> out;
  out.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    ParseResult r = parse(lines[i], grammar);
    if (!r.record) {
      const std::string why = r.report.violations.empty() ? "invalid" : r.report.violations.front().message;
      throw Error(ErrorCode::MalformedFile, fmt::format("ground-truth line {} does not parse: {}", i + 1, why));
    }
    out.push_back(std::move(*r.record));
  }
  return out;
}

void write_samples(const fs::path& dir, const std::vector<BatchSample>& samples) {
  std::string text;
  std::string meta;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    text += samples[i].result.text + "\n";
    meta += sidecar_line(samples[i], i) + "\n";
  }
  write_text(dir / outputs::kSamples, text);
  write_text(dir / outputs::kSidecar, meta);
}

}  // namespace

fs::path checkpoint_path(const RunConfig& config, std::int64_t step) {
  return config.out_dir / outputs::kCheckpoints / fmt::format("step_{:08d}.ckpt", step);
}

void cmd_ingest(const RunConfig& c, std::ostream& log) {
  std::vector<std::vector<SceneRecord>> pools;
  ordered_json manifest;
  manifest["seed"] = c.seed;
  manifest["templates"] = c.corpus.templates == TemplateMix::A ? "a" : "a+b";
  manifest["special_words"] = c.corpus.special_words;
  manifest["mask_points"] = c.corpus.mask_points;
  ordered_json datasets = ordered_json::array();
  std::size_t available = 0;
  for (const DatasetSpec& d : c.datasets) {
    ordered_json entry;
    entry["name"] = d.name;
    entry["annotation"] = std::string(to_string(d.annotation_type));
    entry["data_type"] = std::string(to_string(d.data_type));
    entry["proportion"] = d.proportion;
    if (d.source == DatasetSource::Coco) {
      QuantizeOptions q;
      q.data_type = d.data_type;
      q.mask_points = c.corpus.mask_points;
      DatasetRecords recs = ingest_dataset(d.path, d.annotation_type, q);
      entry["source"] = "coco";
      entry["path"] = d.path.filename().string();
      entry["stats"] = stats_json(recs.stats);
      pools.push_back(std::move(recs.records));
    } else {
      auto recs = synthetic_scenes(d.synthetic, d.scenes, derive_seed(c.seed, "synthetic." + d.name));
      for (SceneRecord& r : recs) r.data_type = d.data_type;
      entry["source"] = "synthetic";
      entry["scenes"] = d.scenes;
      pools.push_back(std::move(recs));
    }
    entry["available"] = pools.back().size();
    available += pools.back().size();
    datasets.push_back(std::move(entry));
  }

  const std::size_t total = c.corpus.lines ? c.corpus.lines : available;
  std::vector<double> proportions;
  for (const DatasetSpec& d : c.datasets) proportions.push_back(d.proportion);
  const std::vector<std::size_t> counts = allocate(proportions, total);

  std::vector<std::pair<std::size_t, std::size_t>> picks;
  for (std::size_t i = 0; i < c.datasets.size(); ++i) {
    datasets[i]["lines"] = counts[i];
    if (counts[i] == 0) continue;
    std::mt19937_64 rng(derive_seed(c.seed, "ingest." + c.datasets[i].name));
    for (std::size_t k : draw(pools[i].size(), counts[i], rng)) picks.emplace_back(i, k);
  }
  std::mt19937_64 shuffle_rng(derive_seed(c.seed, "shuffle"));
  std::shuffle(picks.begin(), picks.end(), shuffle_rng);

  std::mt19937_64 template_rng(derive_seed(c.seed, "template"));
  const GrammarOptions grammar = c.corpus.grammar();
  std::vector<std::string> lines;
  lines.reserve(picks.size());
  std::string line_templates;
  std::size_t count_a = 0;
  for (const auto& [ds, idx] : picks) {
    Template t = Template::A;
    if (c.corpus.templates == TemplateMix::AB && template_rng() % 2 == 1) t = Template::B;
    lines.push_back(serialize(pools[ds][idx], t, template_rng(), grammar).text);
    line_templates += t == Template::A ? 'a' : 'b';
    if (t == Template::A) ++count_a;
  }
  if (lines.empty()) throw Error(ErrorCode::EmptyCorpus, "ingest produced no lines");

  manifest["datasets"] = std::move(datasets);
  manifest["lines"] = lines.size();
  manifest["template_a"] = count_a;
  manifest["template_b"] = lines.size() - count_a;
  manifest["line_templates"] = line_templates;

  fs::create_directories(c.out_dir);
  write_lines(out_file(c, outputs::kCorpus), lines);
  write_text(out_file(c, outputs::kManifest), manifest.dump(2) + "\n");
  const Vocabulary vocab = Vocabulary::build(lines, c.corpus.vocabulary());
  vocab.save(out_file(c, outputs::kVocab));
  log << fmt::format("ingest: {} lines ({} template-a, {} template-b), vocabulary {} tokens\n", lines.size(), count_a,
                     lines.size() - count_a, vocab.size());
}

void cmd_train(const RunConfig& c, const CommandInputs& in, std::ostream& log) {
  const Vocabulary vocab = load_vocab(c);
  const fs::path corpus_path = out_file(c, outputs::kCorpus);
  require_file(corpus_path, "corpus (run ingest first)");
  const std::vector<std::string> lines = read_lines(corpus_path);

  std::vector<TokenSeq> seqs;
  std::size_t too_long = 0;
  std::size_t with_unk = 0;
  for (const std::string& line : lines) {
    EncodeResult e = encode(line, vocab);
    if (e.unk_count > 0) ++with_unk;
    if (static_cast<int>(e.ids.size()) > c.model.context) {
      ++too_long;
      continue;
    }
    seqs.push_back(std::move(e.ids));
  }
  if (seqs.empty()) throw Error(ErrorCode::EmptyCorpus, "no corpus line fits the model context");
  log << fmt::format("train: {} sequences, {} longer than context {} skipped, {} with unknown words\n", seqs.size(),
                     too_long, c.model.context, with_unk);

  ModelConfig mc = c.model;
  mc.vocab_size = vocab.size();
  mc.seed = derive_seed(c.seed, "init");
  mc.validate();
  const TrainConfig& tc = c.train.optimizer;

  BatchLoader loader(seqs, tc.batch_size, derive_seed(c.seed, "batches"));
  std::optional<TrainState> state;
  const fs::path loss_path = out_file(c, outputs::kLossLog);
  std::ofstream loss_log;
  if (in.resume) {
    require_file(*in.resume, "resume checkpoint");
    LoadedCheckpoint ck = load_checkpoint(*in.resume, vocab.size());
    ModelConfig saved = ck.state.model.params().config();
    if (!(saved == mc)) throw Error(ErrorCode::VersionMismatch, "checkpoint model config differs from the config file");
    loader.restore(ck.loader_state);
    state.emplace(std::move(ck.state));
    loss_log.open(loss_path, std::ios::binary | std::ios::app);
    log << fmt::format("train: resuming at step {}\n", state->step);
  } else {
    Parameters<float> params = Parameters<float>::init(mc);
    if (c.train.number_embeddings == NumberEmbeddings::Sinusoidal) init_number_embeddings(params, vocab);
    state.emplace(std::move(params), derive_seed(c.seed, "dropout"));
    fs::create_directories(c.out_dir / outputs::kCheckpoints);
    save_checkpoint(checkpoint_path(c, 0), *state, loader.state());
    loss_log.open(loss_path, std::ios::binary | std::ios::trunc);
    loss_log << "step,loss,grad_norm,learning_rate\n";
  }
  if (!loss_log) throw Error(ErrorCode::Io, "cannot write " + loss_path.string());

  const auto start = std::chrono::steady_clock::now();
  const std::int64_t first = state->step;
  while (state->step < tc.total_steps) {
    const Batch batch = loader.next();
    const StepResult r = train_step(*state, batch, tc);
    loss_log << fmt::format("{},{:.9g},{:.9g},{:.9g}\n", state->step, r.loss, r.grad_norm, r.learning_rate);
    const bool periodic = c.train.checkpoint_every > 0 && state->step % c.train.checkpoint_every == 0;
    if (periodic || state->step == tc.total_steps) {
      loss_log.flush();
      save_checkpoint(checkpoint_path(c, state->step), *state, loader.state());
    }
    if (state->step % 100 == 0 || state->step == tc.total_steps) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      log << fmt::format("train: step {} loss {:.4f} lr {:.2e} ({:.1f}s, {:.0f} ms/step)\n", state->step, r.loss,
                         r.learning_rate, secs, 1000.0 * secs / static_cast<double>(state->step - first));
    }
  }
  loss_log.close();
  fs::create_directories(c.out_dir / outputs::kCheckpoints);
  save_checkpoint(c.out_dir / outputs::kCheckpoints / outputs::kLatest, *state, loader.state());
  log << fmt::format("train: finished at step {}\n", state->step);
}

void cmd_sample(const RunConfig& c, const CommandInputs& in, std::ostream& log) {
  const Vocabulary vocab = load_vocab(c);
  const LoadedCheckpoint ck = load_checkpoint(sample_checkpoint(c), vocab.size());
  std::vector<PromptRequest> requests;
  auto repeat = [&](const std::string& prompt) {
    const PromptRequest r = request_from_prompt(prompt);
    for (int k = 0; k < c.sample.count; ++k) requests.push_back(r);
  };
  if (in.prompt && in.prompt_file) throw Error(ErrorCode::Usage, "give either --prompt or --prompt-file");
  if (in.prompt) {
    repeat(*in.prompt);
  } else if (in.prompt_file) {
    require_file(*in.prompt_file, "prompt file");
    for (const std::string& line : read_lines(*in.prompt_file)) {
      if (!line.empty()) repeat(line);
    }
  } else {
    PromptGenerator gen(vocab_categories(vocab), derive_seed(c.seed, "prompts"), c.eval.options.min_instances,
                        c.eval.options.max_instances);
    for (int k = 0; k < c.sample.count; ++k) requests.push_back(gen.next());
  }
  SampleOptions opt = c.sample.options;
  opt.seed = derive_seed(c.seed, "sample");
  const auto samples = batch_sample(ck.state.model.params(), vocab, requests, opt);
  fs::create_directories(c.out_dir);
  write_samples(c.out_dir, samples);
  const auto terminated = std::count_if(samples.begin(), samples.end(), [](const BatchSample& s) { return s.result.terminated; });
  log << fmt::format("sample: {} sequences, {} terminated with EOS\n", samples.size(), terminated);
}

void cmd_decode(const RunConfig& c, const CommandInputs& in, std::ostream& log) {
  const fs::path input = in.input.value_or(out_file(c, outputs::kSamples));
  require_file(input, "sequence file");
  const std::vector<std::string> lines = read_lines(input);
  const GrammarOptions grammar = c.corpus.grammar();
  std::vector<LayoutEntry> entries;
  std::size_t format_ok = 0;
  std::size_t matching_ok = 0;
  std::size_t format_violations = 0;
  std::size_t matching_violations = 0;
  std::string details;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    ParseResult r = parse(lines[i], grammar);
    if (r.report.format_ok) ++format_ok;
    if (r.report.format_ok && r.report.matching_ok) ++matching_ok;
    for (const Violation& v : r.report.violations) {
      if (v.kind == ViolationKind::Format) ++format_violations;
      else ++matching_violations;
      details += fmt::format("line {}\t{}\t{}\t{}\n", i, v.kind == ViolationKind::Format ? "format" : "matching",
                             v.position, v.message);
    }
    if (r.record) entries.push_back({i, std::move(*r.record)});
  }
  fs::create_directories(c.out_dir);
  write_layout_file(out_file(c, outputs::kLayouts), entries);
  std::string report;
  report += fmt::format("sequences = {}\n", lines.size());
  report += fmt::format("format_ok = {}\n", format_ok);
  report += fmt::format("matching_ok = {}\n", matching_ok);
  report += fmt::format("format_violations = {}\n", format_violations);
  report += fmt::format("matching_violations = {}\n", matching_violations);
  report += details;
  write_text(out_file(c, outputs::kDecodeReport), report);
  log << fmt::format("decode: {} sequences, {} format-valid, {} decoded\n", lines.size(), format_ok, entries.size());
}

void cmd_eval(const RunConfig& c, const CommandInputs& in, std::ostream& log) {
  const Vocabulary vocab = load_vocab(c);
  const LoadedCheckpoint ck = load_checkpoint(sample_checkpoint(c), vocab.size());
  const fs::path gt_path = in.input.value_or(out_file(c, outputs::kCorpus));
  require_file(gt_path, "ground-truth corpus");
  const std::vector<SceneRecord> truth = parse_corpus(read_lines(gt_path), c.corpus.grammar());
  const std::vector<std::string> categories = c.eval.categories.value_or(categories_of(truth));

  ModelSource source(ck.state.model.params(), vocab, c.sample.options);
  const EvalResult result = evaluate(source, truth, categories, c.eval.options, derive_seed(c.seed, "eval"));

  const fs::path dir = c.out_dir / outputs::kEvalDir;
  fs::create_directories(dir);
  write_text(dir / "report.txt", result.report.to_text());
  write_lines(dir / outputs::kSamples, result.sequences);
  std::string meta;
  for (std::size_t i = 0; i < result.requests.size(); ++i) {
    BatchSample s;
    s.request = result.requests[i];
    s.options = c.sample.options;
    meta += sidecar_line(s, i) + "\n";
  }
  write_text(dir / outputs::kSidecar, meta);
  write_priors(dir, "truth", result.truth);
  write_priors(dir, "model", result.model);
  const fs::path svg = dir / outputs::kSvgDir;
  fs::create_directories(svg);
  auto plot = [&](const EvalPriors& priors, const std::string& prefix) {
    for (const LocationPrior& p : priors.location) {
      write_text(svg / fmt::format("{}_location_{}.svg", prefix, file_slug(p.category)), render_location_svg(p));
    }
    for (const ShapePrior& p : priors.shape) {
      write_text(svg / fmt::format("{}_shape_{}.svg", prefix, file_slug(p.category)), render_shape_svg(p));
    }
  };
  plot(result.truth, "truth");
  plot(result.model, "model");
  log << result.report.to_text();
}

void cmd_render(const RunConfig& c, const CommandInputs& in, std::ostream& log) {
  const fs::path input = in.input.value_or(out_file(c, outputs::kLayouts));
  require_file(input, "layout file");
  const std::vector<LayoutEntry> entries = read_layout_file(input);
  const fs::path dir = c.out_dir / outputs::kSvgDir;
  fs::create_directories(dir);
  for (const LayoutEntry& e : entries) {
    write_text(dir / (record_hash(e.record) + ".svg"), render_svg(e.record, c.render));
  }
  log << fmt::format("render: {} layouts written to {}\n", entries.size(), dir.string());
}

}  // namespace layoutprior
