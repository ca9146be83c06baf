#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "layoutprior/commands.hpp"
#include "layoutprior/error.hpp"
#include "layoutprior/grammar.hpp"
#include "layoutprior/layout_io.hpp"

using namespace layoutprior;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("layoutprior_cmd_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RunConfig config_in(const fs::path& dir, const std::string& body) {
  std::ofstream(dir / "run.ini") << body;
  return load_config(dir / "run.ini");
}

const std::string kTiny = R"([run]
seed = 3
out = out

[dataset.shapes]
source = synthetic
scenes = 60

[model]
context = 192
layers = 1
heads = 2
embed_dim = 16

[train]
steps = 8
batch_size = 4
checkpoint_every = 4

[sample]
count = 4
max_tokens = 192
constrained = true

[eval]
min_per_category = 1
samples = 4
strict = false
)";

int run_cli(const std::string& args) {
  const std::string cmd = std::string(LAYOUTPRIOR_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("ingest allocates lines by proportion") {
  const auto dir = fresh_dir("alloc");
  const RunConfig c = config_in(dir, R"([run]
out = out
[dataset.left]
source = synthetic
scenes = 700
proportion = 0.5
[dataset.right]
source = synthetic
scenes = 300
proportion = 0.5
[corpus]
lines = 1000
)");
  std::ostringstream log;
  cmd_ingest(c, log);
  const auto manifest = nlohmann::json::parse(slurp(c.out_dir / outputs::kManifest));
  CHECK(manifest["lines"] == 1000);
  CHECK(manifest["datasets"][0]["lines"] == 500);
  CHECK(manifest["datasets"][1]["lines"] == 500);
  CHECK(manifest["template_b"] == 0);
  CHECK(read_lines(c.out_dir / outputs::kCorpus).size() == 1000);
}

TEST_CASE("ingest of the coco fixture yields parseable lines") {
  const auto dir = fresh_dir("coco");
  const RunConfig c = config_in(dir, std::string(R"([run]
out = out
[dataset.coco]
source = coco
annotation = box
path = )") + LAYOUTPRIOR_TEST_DATA + "/coco_boxes.json\n");
  std::ostringstream log;
  cmd_ingest(c, log);
  const auto lines = read_lines(c.out_dir / outputs::kCorpus);
  CHECK(lines.size() == 5);
  for (const auto& line : lines) {
    const ParseResult p = parse(line);
    CHECK_MESSAGE(p.record, line);
  }
  const Vocabulary v = Vocabulary::load(c.out_dir / outputs::kVocab);
  for (const auto& line : lines) CHECK(encode(line, v).unk_count == 0);
}

TEST_CASE("ingest is byte deterministic for a fixed seed") {
  const auto a = fresh_dir("det_a");
  const auto b = fresh_dir("det_b");
  std::ostringstream log;
  const RunConfig ca = config_in(a, kTiny + "[corpus]\ntemplates = a+b\n");
  const RunConfig cb = config_in(b, kTiny + "[corpus]\ntemplates = a+b\n");
  cmd_ingest(ca, log);
  cmd_ingest(cb, log);
  CHECK(slurp(ca.out_dir / outputs::kCorpus) == slurp(cb.out_dir / outputs::kCorpus));
  CHECK(slurp(ca.out_dir / outputs::kManifest) == slurp(cb.out_dir / outputs::kManifest));
  CHECK(slurp(ca.out_dir / outputs::kVocab) == slurp(cb.out_dir / outputs::kVocab));
  const auto manifest = nlohmann::json::parse(slurp(ca.out_dir / outputs::kManifest));
  CHECK(manifest["template_a"].get<int>() > 0);
  CHECK(manifest["template_b"].get<int>() > 0);
}

TEST_CASE("zero-step training writes only the initial and latest checkpoints") {
  const auto dir = fresh_dir("zero");
  std::string body = kTiny;
  body.replace(body.find("steps = 8"), 9, "steps = 0");
  const RunConfig c = config_in(dir, body);
  std::ostringstream log;
  cmd_ingest(c, log);
  cmd_train(c, {}, log);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(c.out_dir / outputs::kCheckpoints)) names.push_back(e.path().filename());
  std::sort(names.begin(), names.end());
  CHECK(names == std::vector<std::string>{"latest.ckpt", "step_00000000.ckpt"});
  CHECK(read_lines(c.out_dir / outputs::kLossLog) == std::vector<std::string>{"step,loss,grad_norm,learning_rate"});
}

TEST_CASE("resumed training matches an uninterrupted run") {
  const auto full_dir = fresh_dir("full");
  const auto part_dir = fresh_dir("part");
  const RunConfig full = config_in(full_dir, kTiny);
  const RunConfig part = config_in(part_dir, kTiny);
  std::ostringstream log;
  cmd_ingest(full, log);
  cmd_ingest(part, log);
  cmd_train(full, {}, log);
  const auto full_loss = read_lines(full.out_dir / outputs::kLossLog);
  REQUIRE(full_loss.size() == 9);

  fs::create_directories(part.out_dir / outputs::kCheckpoints);
  fs::copy_file(checkpoint_path(full, 4), checkpoint_path(part, 4));
  write_lines(part.out_dir / outputs::kLossLog, {full_loss.begin(), full_loss.begin() + 5});
  CommandInputs in;
  in.resume = checkpoint_path(part, 4);
  cmd_train(part, in, log);
  CHECK(read_lines(part.out_dir / outputs::kLossLog) == full_loss);
  CHECK(slurp(checkpoint_path(part, 8)) == slurp(checkpoint_path(full, 8)));
  CHECK(fs::exists(part.out_dir / outputs::kCheckpoints / outputs::kLatest));

  std::string other = kTiny;
  other.replace(other.find("embed_dim = 16"), 14, "embed_dim = 32");
  const RunConfig mismatched = config_in(fresh_dir("mismatch"), other);
  fs::create_directories(mismatched.out_dir);
  for (const char* f : {outputs::kCorpus, outputs::kVocab}) fs::copy_file(full.out_dir / f, mismatched.out_dir / f);
  CommandInputs bad;
  bad.resume = checkpoint_path(full, 4);
  CHECK_THROWS_AS(cmd_train(mismatched, bad, log), Error);
}

TEST_CASE("sample, decode, render and eval run end to end") {
  const auto dir = fresh_dir("pipeline");
  const RunConfig c = config_in(dir, kTiny);
  std::ostringstream log;
  cmd_ingest(c, log);
  cmd_train(c, {}, log);
  cmd_sample(c, {}, log);
  const auto samples = read_lines(c.out_dir / outputs::kSamples);
  CHECK(samples.size() == 4);
  CHECK(read_lines(c.out_dir / outputs::kSidecar).size() == 4);
  for (const auto& s : samples) CHECK(parse(s).record);

  CommandInputs prompt;
  prompt.prompt = "box; multiple instances; small; 2; 0; A,";
  cmd_sample(c, prompt, log);
  for (const auto& s : read_lines(c.out_dir / outputs::kSamples)) CHECK(s.rfind(*prompt.prompt, 0) == 0);

  cmd_decode(c, {}, log);
  const auto layouts = read_layout_file(c.out_dir / outputs::kLayouts);
  CHECK(layouts.size() == 4);
  CHECK(slurp(c.out_dir / outputs::kDecodeReport).rfind("sequences = 4\nformat_ok = 4\n", 0) == 0);
  cmd_render(c, {}, log);
  std::size_t svgs = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(c.out_dir / outputs::kSvgDir)) ++svgs;
  CHECK(svgs >= 1);

  cmd_eval(c, {}, log);
  const std::string report = slurp(c.out_dir / outputs::kEvalDir / "report.txt");
  CHECK(report.find("format_accuracy = 1.000000") != std::string::npos);
  CHECK(fs::exists(c.out_dir / outputs::kEvalDir / "truth_location.txt"));
  CHECK(fs::exists(c.out_dir / outputs::kEvalDir / outputs::kSvgDir / "truth_location_A.svg"));
}

TEST_CASE("decoding an empty file gives an empty layout file") {
  const auto dir = fresh_dir("empty");
  const RunConfig c = config_in(dir, kTiny);
  fs::create_directories(c.out_dir);
  write_lines(dir / "empty.txt", {});
  CommandInputs in;
  in.input = dir / "empty.txt";
  std::ostringstream log;
  cmd_decode(c, in, log);
  CHECK(slurp(c.out_dir / outputs::kLayouts).empty());
  CHECK(slurp(c.out_dir / outputs::kDecodeReport).rfind("sequences = 0\n", 0) == 0);
}

TEST_CASE("cli exit codes follow the error family") {
  const auto dir = fresh_dir("cli");
  std::ofstream(dir / "run.ini") << kTiny;
  std::ofstream(dir / "bad.ini") << "[model]\nlayerz = 1\n";
  std::ofstream(dir / "range.ini") << kTiny << "[corpus]\nmask_points = 1\n";
  const std::string cfg = "--config " + (dir / "run.ini").string();
  CHECK(run_cli("") == 2);
  CHECK(run_cli("ingest") == 2);
  CHECK(run_cli("ingest --config " + (dir / "bad.ini").string()) == 2);
  CHECK(run_cli("ingest --config " + (dir / "range.ini").string()) == 5);
  CHECK(run_cli("ingest --config " + (dir / "missing.ini").string()) == 8);
  CHECK(run_cli("train " + cfg) == 8);
  CHECK(run_cli("ingest " + cfg) == 0);
  CHECK(run_cli("decode " + cfg + " --input " + (dir / "nope.txt").string()) == 8);
  CHECK(run_cli("sample " + cfg + " --prompt x --prompt-file y") == 2);
  const std::string diag = (dir / "diag.txt").string();
  const int status =
      std::system((std::string(LAYOUTPRIOR_CLI) + " train " + cfg + " --resume /nonexistent.ckpt 2>" + diag).c_str());
  CHECK(WEXITSTATUS(status) == 8);
  CHECK(slurp(diag).find("\nerror: family=io code=Io message=\"resume checkpoint not found") != std::string::npos);
}
