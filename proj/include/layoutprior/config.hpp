#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "layoutprior/evalsuite.hpp"
#include "layoutprior/model.hpp"
#include "layoutprior/render.hpp"
#include "layoutprior/sampler.hpp"
#include "layoutprior/scene.hpp"
#include "layoutprior/synthetic.hpp"
#include "layoutprior/train.hpp"

namespace layoutprior {

enum class DatasetSource { Coco, Synthetic };

struct DatasetSpec {
  std::string name;
  DatasetSource source = DatasetSource::Coco;
  std::filesystem::path path;  // coco only, resolved against the config directory
  AnnotationType annotation_type = AnnotationType::Box;
  DataType data_type = DataType::MultipleInstances;
  double proportion = 1.0;
  std::size_t scenes = 0;  // synthetic only
  SyntheticOptions synthetic;
};

enum class TemplateMix { A, AB };

struct CorpusConfig {
  std::size_t lines = 0;  // 0 keeps the total number of available records
  TemplateMix templates = TemplateMix::A;
  bool special_words = true;
  int mask_points = kDefaultMaskPoints;

  GrammarOptions grammar() const;
  VocabularyOptions vocabulary() const;
};

enum class NumberEmbeddings { Random, Sinusoidal };

struct TrainRunConfig {
  TrainConfig optimizer;
  NumberEmbeddings number_embeddings = NumberEmbeddings::Sinusoidal;  // initialization of integer tokens
  std::int64_t checkpoint_every = 0;  // 0 writes only the final checkpoint
};

struct SampleRunConfig {
  SampleOptions options;
  int count = 1;                        // samples per prompt, or generated prompts when none is given
  std::optional<std::filesystem::path> checkpoint;  // defaults to <out>/checkpoints/latest.ckpt
};

struct EvalRunConfig {
  EvalOptions options;
  std::optional<std::vector<std::string>> categories;  // defaults to every ground-truth category
};

/// Everything a command needs; loaded from an INI-style file.
struct RunConfig {
  std::filesystem::path config_dir;
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 0;
  std::vector<DatasetSpec> datasets;
  CorpusConfig corpus;
  ModelConfig model;  // vocab_size is filled from the vocabulary
  TrainRunConfig train;
  SampleRunConfig sample;
  EvalRunConfig eval;
  RenderStyle render;

  /// Throws InvalidConfig.
  void validate() const;
};

/// Throws Usage for unreadable or unknown keys, InvalidConfig for bad
/// values, Io for missing dataset files.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text, const std::filesystem::path& config_dir);

std::uint64_t splitmix64(std::uint64_t x);
/// Independent stream seed for a named stage ("ingest", "shuffle", "train", ...).
std::uint64_t derive_seed(std::uint64_t global, std::string_view name);

}  // namespace layoutprior
