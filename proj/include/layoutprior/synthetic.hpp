#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "layoutprior/evalsuite.hpp"
#include "layoutprior/scene.hpp"

namespace layoutprior {

/// Two-category box scenes with known priors. Category `first` sits fully
/// inside the top-left quadrant with ln(w/h) ~ Normal(ln 2, aspect_sigma);
/// category `second` is square and sits fully inside the bottom half.
/// Positions are uniform over the admissible region.
struct SyntheticOptions {
  std::string first = "A";
  std::string second = "B";
  double cooccurrence = 0.7;  // share of scenes holding both categories
  double aspect_sigma = 0.1;
  int min_instances = 2;
  int max_instances = 10;

  void validate() const;  // throws InvalidConfig
};

/// Side-length range (sqrt of box area) drawn for each size class; every
/// range sits strictly inside its classify_size band.
struct SideRange {
  double lo = 0.0;
  double hi = 0.0;
};
SideRange side_range(SizeFlag size);

/// One scene; size class uniform, instance count uniform in
/// [min_instances, max_instances]. The stored size flag is classify_size of
/// the quantized boxes.
SceneRecord synthetic_scene(const SyntheticOptions& options, std::mt19937_64& rng);

std::vector<SceneRecord> synthetic_scenes(const SyntheticOptions& options, std::size_t count, std::uint64_t seed);

/// Control sampler: answers each prompt with boxes of uniform position and
/// log-uniform aspect anywhere on the canvas, categories drawn uniformly,
/// instance count and size class as requested.
class UniformSource : public SequenceSource {
 public:
  explicit UniformSource(std::vector<std::string> categories) : categories_(std::move(categories)) {}
  std::vector<std::string> generate(const std::vector<PromptRequest>& requests, std::uint64_t seed) override;

 private:
  std::vector<std::string> categories_;
};

}  // namespace layoutprior
