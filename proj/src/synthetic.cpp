#include "layoutprior/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "layoutprior/annotations.hpp"
#include "layoutprior/error.hpp"
#include "layoutprior/grammar.hpp"

namespace layoutprior {

void SyntheticOptions::validate() const {
  auto bad = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, "synthetic options: " + why); };
  validate_category(first);
  validate_category(second);
  if (first == second) bad("the two categories must differ");
  if (!(cooccurrence >= 0.0 && cooccurrence <= 1.0)) bad("cooccurrence must be in [0, 1]");
  if (!(aspect_sigma >= 0.0)) bad("aspect_sigma must be non-negative");
  if (min_instances < 2 || max_instances < min_instances) bad("instance range must satisfy 2 <= min <= max");
}

SideRange side_range(SizeFlag size) {
  switch (size) {
    case SizeFlag::Small: return {12.0, 28.0};
    case SizeFlag::Medium: return {40.0, 85.0};
    case SizeFlag::Large: return {105.0, 150.0};
  }
  return {};
}

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int quantize(double v) {
  return std::clamp(static_cast<int>(std::lround(v)), 0, kCanvasSize);
}

// Continuous box of the given extent placed uniformly inside the region;
// each corner is rounded on its own.
Box place(std::mt19937_64& rng, double w, double h, double x0, double y0, double x1, double y1) {
  w = std::min(w, x1 - x0);
  h = std::min(h, y1 - y0);
  const double x = uniform(rng, x0, x1 - w);
  const double y = uniform(rng, y0, y1 - h);
  return {quantize(x), quantize(y), quantize(x + w), quantize(y + h)};
}

constexpr double kHalf = kCanvasSize / 2.0;

}  // namespace

SceneRecord synthetic_scene(const SyntheticOptions& o, std::mt19937_64& rng) {
  const auto size = static_cast<SizeFlag>(rng() % 3);
  const int n = o.min_instances + static_cast<int>(rng() % static_cast<std::uint64_t>(o.max_instances - o.min_instances + 1));
  std::vector<bool> is_first(static_cast<std::size_t>(n));
  if (uniform(rng, 0.0, 1.0) < o.cooccurrence) {
    const int k = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(n - 1));
    for (int i = 0; i < n; ++i) is_first[static_cast<std::size_t>(i)] = i < k;
  } else {
    const bool which = rng() % 2 == 0;
    std::fill(is_first.begin(), is_first.end(), which);
  }
  const SideRange range = side_range(size);
  std::normal_distribution<double> aspect(std::log(2.0), o.aspect_sigma);

  SceneRecord rec;
  rec.annotation_type = AnnotationType::Box;
  rec.data_type = DataType::MultipleInstances;
  for (bool f : is_first) {
    const double side = uniform(rng, range.lo, range.hi);
    Instance inst;
    if (f) {
      const double r = std::sqrt(std::exp(aspect(rng)));
      inst.category = o.first;
      inst.geometry = place(rng, side * r, side / r, 0.0, 0.0, kHalf, kHalf);
    } else {
      inst.category = o.second;
      inst.geometry = place(rng, side, side, 0.0, kHalf, kCanvasSize, kCanvasSize);
    }
    rec.instances.push_back(std::move(inst));
  }
  rec.size_flag = classify_size(rec.instances);
  return rec;
}

std::vector<SceneRecord> synthetic_scenes(const SyntheticOptions& options, std::size_t count, std::uint64_t seed) {
  options.validate();
  std::mt19937_64 rng(seed);
  std::vector<SceneRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(synthetic_scene(options, rng));
  return out;
}

std::vector<std::string> UniformSource::generate(const std::vector<PromptRequest>& requests, std::uint64_t seed) {
  if (categories_.empty()) throw Error(ErrorCode::InvalidConfig, "uniform source needs at least one category");
  std::mt19937_64 rng(seed);
  std::vector<std::string> out;
  out.reserve(requests.size());
  for (const PromptRequest& req : requests) {
    const int n = std::max(1, req.instances.value_or(2));
    const SideRange range = side_range(req.size.value_or(SizeFlag::Medium));
    SceneRecord rec;
    rec.annotation_type = AnnotationType::Box;
    rec.data_type = DataType::MultipleInstances;
    for (int i = 0; i < n; ++i) {
      Instance inst;
      inst.category = i == 0 && !req.category.empty() ? req.category : categories_[rng() % categories_.size()];
      const double side = uniform(rng, range.lo, range.hi);
      const double r = std::sqrt(std::exp(uniform(rng, std::log(0.25), std::log(4.0))));
      inst.geometry = place(rng, side * r, side / r, 0.0, 0.0, kCanvasSize, kCanvasSize);
      rec.instances.push_back(std::move(inst));
    }
    rec.size_flag = classify_size(rec.instances);
    out.push_back(serialize(rec, Template::A, rng()).text);
  }
  return out;
}

}  // namespace layoutprior
