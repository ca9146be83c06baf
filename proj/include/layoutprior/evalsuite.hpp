#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "layoutprior/grammar.hpp"
#include "layoutprior/sampler.hpp"
#include "layoutprior/scene.hpp"

namespace layoutprior {

inline constexpr int kDefaultGrid = 64;
inline constexpr int kDefaultShapeBins = 50;
inline constexpr double kDefaultSmoothing = 1e-8;

/// G x G grid, row-major (y major), summing to 1.
struct LocationPrior {
  std::string category;
  int grid = 0;
  std::vector<double> cells;
};

/// Histogram of ln(w / h) over `bins` uniform bins spanning [ln 1/8, ln 8].
struct ShapePrior {
  std::string category;
  std::vector<double> edges;  // bins + 1, strictly increasing
  std::vector<double> mass;
};

struct RelationPrior {
  std::vector<std::string> categories;
  std::vector<double> counts;  // C x C raw co-occurrence counts, diagonal 0
  std::vector<double> matrix;  // C x C, rows smoothed off-diagonal and normalized
};

/// Instances of `category` contribute their bounding-box interiors (pixels
/// [xmin, xmax) x [ymin, ymax)) on a canvas x canvas grid, block-averaged to
/// grid x grid, normalized, then smoothed by epsilon. Throws NoInstances,
/// InvalidConfig when canvas is not a multiple of grid.
LocationPrior location_prior(std::span<const SceneRecord> records, const std::string& category, int grid = kDefaultGrid,
                             double epsilon = kDefaultSmoothing, int canvas = kCanvasSize);

/// Instances with zero width or height are skipped. Throws NoInstances.
ShapePrior shape_prior(std::span<const SceneRecord> records, const std::string& category,
                       int bins = kDefaultShapeBins, double epsilon = kDefaultSmoothing);

/// count[c][c'] = number of records holding both c and c' (binary presence),
/// or the product of their instance counts when `multiplicity` is set.
RelationPrior relation_prior(std::span<const SceneRecord> records, const std::vector<std::string>& categories,
                             double epsilon = kDefaultSmoothing, bool multiplicity = false);

/// sum p ln(p / q) in nats with 0 ln(0 / q) = 0. Throws SupportMismatch.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// Categories in first-appearance order.
std::vector<std::string> categories_of(std::span<const SceneRecord> records);

struct QualityMetrics {
  std::size_t total = 0;
  std::size_t format_ok = 0;
  std::size_t matching_ok = 0;
  double format_accuracy() const { return total ? static_cast<double>(format_ok) / static_cast<double>(total) : 0.0; }
  double matching_accuracy() const { return total ? static_cast<double>(matching_ok) / static_cast<double>(total) : 0.0; }
};

QualityMetrics quality_metrics(std::span<const std::string> sequences, const GrammarOptions& options = {});

struct ControllabilityMetrics {
  std::size_t total = 0;
  std::size_t size_ok = 0;
  std::size_t count_ok = 0;
  double size_accuracy() const { return total ? static_cast<double>(size_ok) / static_cast<double>(total) : 0.0; }
  double count_accuracy() const { return total ? static_cast<double>(count_ok) / static_cast<double>(total) : 0.0; }
};

/// Sequences failing Format or Matching count as failures for both.
/// Throws MissingSidecar when the request list does not cover every sequence.
ControllabilityMetrics controllability_metrics(std::span<const std::string> sequences,
                                               std::span<const PromptRequest> requests,
                                               const GrammarOptions& options = {});

/// Anything that turns prompts into sequence strings.
class SequenceSource {
 public:
  virtual ~SequenceSource() = default;
  virtual std::vector<std::string> generate(const std::vector<PromptRequest>& requests, std::uint64_t seed) = 0;
};

class ModelSource : public SequenceSource {
 public:
  ModelSource(const Parameters<float>& params, const Vocabulary& vocab, SampleOptions options)
      : params_(&params), vocab_(&vocab), options_(std::move(options)) {}
  std::vector<std::string> generate(const std::vector<PromptRequest>& requests, std::uint64_t seed) override;

 private:
  const Parameters<float>* params_;
  const Vocabulary* vocab_;
  SampleOptions options_;
};

/// Replays ground-truth records holding the prompt's leading category,
/// chosen uniformly at random; serves as an ideal sampler.
class ReplaySource : public SequenceSource {
 public:
  explicit ReplaySource(std::vector<SceneRecord> records, Template templ = Template::A)
      : records_(std::move(records)), templ_(templ) {}
  std::vector<std::string> generate(const std::vector<PromptRequest>& requests, std::uint64_t seed) override;

 private:
  std::vector<SceneRecord> records_;
  Template templ_;
};

struct EvalOptions {
  int grid = kDefaultGrid;
  int bins = kDefaultShapeBins;
  double epsilon = kDefaultSmoothing;
  int min_per_category = 80;  // valid sequences each category must appear in
  int samples = 0;            // first-round prompt count; at least categories x min_per_category
  int max_rounds = 4;         // retry budget for categories below the minimum
  bool strict = true;         // throw InsufficientValidSamples instead of skipping
  bool multiplicity = false;
  int min_instances = 2;
  int max_instances = 10;
  GrammarOptions grammar;
};

struct CategoryKl {
  std::string category;
  std::size_t valid_sequences = 0;  // valid generated sequences holding the category
  std::optional<double> location;
  std::optional<double> shape;
  std::optional<double> relation;
};

struct EvalReport {
  QualityMetrics quality;
  ControllabilityMetrics control;
  std::vector<CategoryKl> per_category;
  std::optional<double> location_kl;  // means over categories with defined entries
  std::optional<double> shape_kl;
  std::optional<double> relation_kl;
  std::vector<std::string> skipped;  // categories without generated instances
  std::size_t sequences = 0;
  std::size_t valid_sequences = 0;

  std::string to_text() const;
};

struct EvalPriors {
  std::vector<LocationPrior> location;
  std::vector<ShapePrior> shape;
  RelationPrior relation;
};

struct EvalResult {
  EvalReport report;
  EvalPriors truth;
  EvalPriors model;  // entries only for categories with generated instances
  std::vector<std::string> sequences;
  std::vector<PromptRequest> requests;
};

/// Samples via the prompt generator until every category appears
/// in min_per_category valid sequences (or the retry budget runs out),
/// then compares priors. Throws InsufficientValidSamples in strict mode.
EvalResult evaluate(SequenceSource& source, std::span<const SceneRecord> ground_truth,
                    const std::vector<std::string>& categories, const EvalOptions& options, std::uint64_t seed);

/// Writes prior grids, histograms and the relation matrix as plain-text matrices.
void write_priors(const std::filesystem::path& dir, const std::string& prefix, const EvalPriors& priors);

}  // namespace layoutprior
