#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "layoutprior/commands.hpp"
#include "layoutprior/error.hpp"

namespace lp = layoutprior;

namespace {

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

int report(lp::ErrorFamily family, std::string_view code, const std::string& message) {
  std::cerr << fmt::format("error: family={} code={} message=\"{}\"\n", lp::to_string(family), code, one_line(message));
  return static_cast<int>(family);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layout prior language model: corpus building, training, sampling and evaluation"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  lp::CommandInputs inputs;
  std::optional<std::string> prompt_file;
  std::optional<std::string> input;
  std::optional<std::string> resume;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Run configuration file")->required();
    sub->add_option("--seed", seed, "Override the global seed");
    sub->add_option("--out", out, "Override the output directory");
  };
  auto* ingest = app.add_subcommand("ingest", "Build corpus.txt, its manifest and the vocabulary");
  auto* train = app.add_subcommand("train", "Train the model on the corpus");
  auto* sample = app.add_subcommand("sample", "Sample sequences from a trained model");
  auto* decode = app.add_subcommand("decode", "Parse sequences into structured layouts");
  auto* eval = app.add_subcommand("eval", "Score model samples against ground-truth priors");
  auto* render = app.add_subcommand("render", "Render layouts to SVG");
  for (auto* sub : {ingest, train, sample, decode, eval, render}) common(sub);
  train->add_option("--resume", resume, "Continue from this checkpoint");
  auto* prompt_opt = sample->add_option("--prompt", inputs.prompt, "Prompt prefix");
  sample->add_option("--prompt-file", prompt_file, "File with one prompt per line")->excludes(prompt_opt);
  decode->add_option("--input", input, "Sequence file (default <out>/samples.txt)");
  eval->add_option("--input", input, "Ground-truth corpus (default <out>/corpus.txt)");
  render->add_option("--input", input, "Layout file (default <out>/layouts.jsonl)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report(lp::ErrorFamily::Usage, "Usage", e.what());
  }
  if (prompt_file) inputs.prompt_file = *prompt_file;
  if (input) inputs.input = *input;
  if (resume) inputs.resume = *resume;

  try {
    lp::RunConfig config = lp::load_config(config_path);
    if (seed) config.seed = *seed;
    if (out) config.out_dir = *out;
    if (ingest->parsed()) lp::cmd_ingest(config, std::cerr);
    if (train->parsed()) lp::cmd_train(config, inputs, std::cerr);
    if (sample->parsed()) lp::cmd_sample(config, inputs, std::cerr);
    if (decode->parsed()) lp::cmd_decode(config, inputs, std::cerr);
    if (eval->parsed()) lp::cmd_eval(config, inputs, std::cerr);
    if (render->parsed()) lp::cmd_render(config, inputs, std::cerr);
  } catch (const lp::Error& e) {
    return report(e.family(), lp::to_string(e.code()), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return report(lp::ErrorFamily::Io, "Io", e.what());
  } catch (const std::exception& e) {
    return report(lp::ErrorFamily::Io, "Internal", e.what());
  }
  return 0;
}
