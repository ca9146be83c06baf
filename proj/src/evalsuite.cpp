#include "layoutprior/evalsuite.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>

#include "layoutprior/annotations.hpp"
#include "layoutprior/error.hpp"

namespace layoutprior {

namespace {

void smooth(std::vector<double>& v, double epsilon) {
  const double total = 1.0 + epsilon * static_cast<double>(v.size());
  for (double& x : v) x = (x + epsilon) / total;
}

template <class Fn>
void for_each_instance(std::span<const SceneRecord> records, const std::string& category, Fn fn) {
  for (const SceneRecord& r : records) {
    for (const Instance& inst : r.instances) {
      if (inst.category == category) fn(bounding_box(inst.geometry));
    }
  }
}

std::string format_optional(const std::optional<double>& v) {
  return v ? fmt::format("{:.6f}", *v) : std::string("undefined");
}

std::optional<double> mean_of(const std::vector<CategoryKl>& rows, std::optional<double> CategoryKl::*field) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (r.*field) {
      total += *(r.*field);
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return total / static_cast<double>(n);
}

}  // namespace

LocationPrior location_prior(std::span<const SceneRecord> records, const std::string& category, int grid,
                             double epsilon, int canvas) {
  if (grid <= 0 || canvas <= 0 || canvas % grid != 0) {
    throw Error(ErrorCode::InvalidConfig, fmt::format("canvas {} is not a multiple of grid {}", canvas, grid));
  }
  const auto side = static_cast<std::size_t>(canvas) + 1;
  std::vector<std::int64_t> diff(side * side, 0);
  std::size_t instances = 0;
  auto clampc = [canvas](int v) { return static_cast<std::size_t>(std::clamp(v, 0, canvas)); };
  for_each_instance(records, category, [&](const Box& b) {
    ++instances;
    const std::size_t x0 = clampc(b.xmin), x1 = clampc(b.xmax), y0 = clampc(b.ymin), y1 = clampc(b.ymax);
    if (x1 <= x0 || y1 <= y0) return;
    diff[y0 * side + x0] += 1;
    diff[y0 * side + x1] -= 1;
    diff[y1 * side + x0] -= 1;
    diff[y1 * side + x1] += 1;
  });
  if (instances == 0) throw Error(ErrorCode::NoInstances, "no instances of category '" + category + "'");

  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 1; x < side; ++x) diff[y * side + x] += diff[y * side + x - 1];
  }
  for (std::size_t y = 1; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) diff[y * side + x] += diff[(y - 1) * side + x];
  }

  LocationPrior out;
  out.category = category;
  out.grid = grid;
  const int block = canvas / grid;
  const auto g = static_cast<std::size_t>(grid);
  out.cells.assign(g * g, 0.0);
  for (int y = 0; y < canvas; ++y) {
    for (int x = 0; x < canvas; ++x) {
      const std::size_t cell = static_cast<std::size_t>(y / block) * g + static_cast<std::size_t>(x / block);
      out.cells[cell] += static_cast<double>(diff[static_cast<std::size_t>(y) * side + static_cast<std::size_t>(x)]);
    }
  }
  const double area = static_cast<double>(block) * static_cast<double>(block);
  for (double& c : out.cells) c /= area;
  const double mass = std::accumulate(out.cells.begin(), out.cells.end(), 0.0);
  if (mass > 0.0) {
    for (double& c : out.cells) c /= mass;
  }
  smooth(out.cells, epsilon);
  return out;
}

ShapePrior shape_prior(std::span<const SceneRecord> records, const std::string& category, int bins, double epsilon) {
  if (bins <= 0) throw Error(ErrorCode::InvalidConfig, "shape prior needs at least one bin");
  ShapePrior out;
  out.category = category;
  const double lo = std::log(1.0 / 8.0);
  const double hi = std::log(8.0);
  const auto nb = static_cast<std::size_t>(bins);
  out.edges.resize(nb + 1);
  for (std::size_t i = 0; i <= nb; ++i) out.edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  out.mass.assign(nb, 0.0);
  std::size_t counted = 0;
  for_each_instance(records, category, [&](const Box& b) {
    const int w = b.xmax - b.xmin;
    const int h = b.ymax - b.ymin;
    if (w <= 0 || h <= 0) return;
    const double r = std::log(static_cast<double>(w) / static_cast<double>(h));
    const auto raw = static_cast<long>(std::floor((r - lo) / (hi - lo) * static_cast<double>(bins)));
    out.mass[static_cast<std::size_t>(std::clamp(raw, 0L, static_cast<long>(bins) - 1))] += 1.0;
    ++counted;
  });
  if (counted == 0) throw Error(ErrorCode::NoInstances, "no instances of category '" + category + "' with nonzero extent");
  for (double& m : out.mass) m /= static_cast<double>(counted);
  smooth(out.mass, epsilon);
  return out;
}

RelationPrior relation_prior(std::span<const SceneRecord> records, const std::vector<std::string>& categories,
                             double epsilon, bool multiplicity) {
  RelationPrior out;
  out.categories = categories;
  const std::size_t c = categories.size();
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < c; ++i) index.emplace(categories[i], i);
  out.counts.assign(c * c, 0.0);
  std::vector<double> present(c);
  for (const SceneRecord& r : records) {
    std::fill(present.begin(), present.end(), 0.0);
    for (const Instance& inst : r.instances) {
      auto it = index.find(inst.category);
      if (it == index.end()) continue;
      present[it->second] = multiplicity ? present[it->second] + 1.0 : 1.0;
    }
    for (std::size_t i = 0; i < c; ++i) {
      if (present[i] == 0.0) continue;
      for (std::size_t j = 0; j < c; ++j) {
        if (i != j) out.counts[i * c + j] += present[i] * present[j];
      }
    }
  }
  out.matrix = out.counts;
  for (std::size_t i = 0; i < c; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      if (i == j) continue;
      out.matrix[i * c + j] += epsilon;
      total += out.matrix[i * c + j];
    }
    if (total <= 0.0) continue;
    for (std::size_t j = 0; j < c; ++j) {
      if (i != j) out.matrix[i * c + j] /= total;
    }
  }
  return out;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw Error(ErrorCode::SupportMismatch, fmt::format("support sizes differ: {} vs {}", p.size(), q.size()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    total += p[i] * std::log(p[i] / q[i]);
  }
  return total;
}

std::vector<std::string> categories_of(std::span<const SceneRecord> records) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const SceneRecord& r : records) {
    for (const Instance& inst : r.instances) {
      if (seen.insert(inst.category).second) out.push_back(inst.category);
    }
  }
  return out;
}

QualityMetrics quality_metrics(std::span<const std::string> sequences, const GrammarOptions& options) {
  QualityMetrics m;
  for (const std::string& s : sequences) {
    const ParseResult r = parse(s, options);
    ++m.total;
    if (r.report.format_ok) ++m.format_ok;
    if (r.report.matching_ok) ++m.matching_ok;
  }
  return m;
}

ControllabilityMetrics controllability_metrics(std::span<const std::string> sequences,
                                               std::span<const PromptRequest> requests, const GrammarOptions& options) {
  if (requests.size() != sequences.size()) {
    throw Error(ErrorCode::MissingSidecar, fmt::format("{} sequences but {} sidecar entries", sequences.size(),
                                                       requests.size()));
  }
  for (std::size_t i = 0; i < requests.size(); ++i) {
    if (!requests[i].size || !requests[i].instances) {
      throw Error(ErrorCode::MissingSidecar, fmt::format("sidecar entry {} lacks requested size or count", i));
    }
  }
  ControllabilityMetrics m;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    ++m.total;
    const ParseResult r = parse(sequences[i], options);
    if (!r.record) continue;
    const SceneRecord& rec = *r.record;
    if (classify_size(rec.instances) == requests[i].size) ++m.size_ok;
    if (static_cast<int>(rec.n_instances()) == requests[i].instances) ++m.count_ok;
  }
  return m;
}

std::vector<std::string> ModelSource::generate(const std::vector<PromptRequest>& requests, std::uint64_t seed) {
  SampleOptions opt = options_;
  opt.seed = seed;
  const auto samples = batch_sample(*params_, *vocab_, requests, opt);
  std::vector<std::string> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.result.text);
  return out;
}

std::vector<std::string> ReplaySource::generate(const std::vector<PromptRequest>& requests, std::uint64_t seed) {
  std::unordered_map<std::string, std::vector<std::size_t>> holding;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    std::set<std::string> cats;
    for (const Instance& inst : records_[i].instances) cats.insert(inst.category);
    for (const auto& c : cats) holding[c].push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::vector<std::string> out;
  for (const PromptRequest& req : requests) {
    auto it = holding.find(req.category);
    if (it == holding.end()) {
      out.emplace_back(req.prompt);
      continue;
    }
    const std::size_t pick = it->second[rng() % it->second.size()];
    out.push_back(serialize(records_[pick], templ_, rng()).text);
  }
  return out;
}

std::string EvalReport::to_text() const {
  std::string out;
  out += fmt::format("sequences = {}\n", sequences);
  out += fmt::format("valid_sequences = {}\n", valid_sequences);
  out += fmt::format("format_accuracy = {:.6f}\n", quality.format_accuracy());
  out += fmt::format("matching_accuracy = {:.6f}\n", quality.matching_accuracy());
  out += fmt::format("size_accuracy = {:.6f}\n", control.size_accuracy());
  out += fmt::format("count_accuracy = {:.6f}\n", control.count_accuracy());
  out += "location_kl = " + format_optional(location_kl) + "\n";
  out += "shape_kl = " + format_optional(shape_kl) + "\n";
  out += "relation_kl = " + format_optional(relation_kl) + "\n";
  std::string skipped_list;
  for (std::size_t i = 0; i < skipped.size(); ++i) skipped_list += (i ? "," : "") + skipped[i];
  out += "skipped = " + skipped_list + "\n";
  out += "\n[per_category]\ncategory\tvalid_sequences\tlocation_kl\tshape_kl\trelation_kl\n";
  for (const auto& row : per_category) {
    out += fmt::format("{}\t{}\t{}\t{}\t{}\n", row.category, row.valid_sequences, format_optional(row.location),
                       format_optional(row.shape), format_optional(row.relation));
  }
  return out;
}

EvalResult evaluate(SequenceSource& source, std::span<const SceneRecord> ground_truth,
                    const std::vector<std::string>& categories, const EvalOptions& options, std::uint64_t seed) {
  if (categories.empty()) throw Error(ErrorCode::InvalidConfig, "evaluation needs at least one category");
  if (options.min_per_category < 0 || options.max_rounds < 1) {
    throw Error(ErrorCode::InvalidConfig, "min_per_category must be >= 0 and max_rounds >= 1");
  }
  EvalResult result;
  PromptGenerator gen(categories, seed, options.min_instances, options.max_instances);
  std::unordered_map<std::string, std::size_t> have;
  std::vector<SceneRecord> generated;
  const std::size_t C = categories.size();

  std::vector<PromptRequest> requests;
  const std::size_t first = std::max<std::size_t>(static_cast<std::size_t>(std::max(options.samples, 0)),
                                                  C * static_cast<std::size_t>(options.min_per_category));
  for (std::size_t i = 0; i < std::max<std::size_t>(first, 1); ++i) requests.push_back(gen.next());

  for (int round = 0; round < options.max_rounds && !requests.empty(); ++round) {
    const auto seqs = source.generate(requests, seed + result.sequences.size());
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      ParseResult parsed = parse(seqs[i], options.grammar);
      if (parsed.record) {
        std::set<std::string> cats;
        for (const Instance& inst : parsed.record->instances) cats.insert(inst.category);
        for (const auto& c : cats) ++have[c];
        generated.push_back(std::move(*parsed.record));
      }
    }
    result.sequences.insert(result.sequences.end(), seqs.begin(), seqs.end());
    result.requests.insert(result.requests.end(), requests.begin(), requests.end());

    requests.clear();
    for (const auto& c : categories) {
      const auto got = have[c];
      const auto need = static_cast<std::size_t>(options.min_per_category);
      for (std::size_t k = got; k < need; ++k) {
        PromptRequest r = gen.next();
        r.category = c;
        r.prompt = make_prompt(r);
        requests.push_back(std::move(r));
      }
    }
  }

  EvalReport& rep = result.report;
  rep.sequences = result.sequences.size();
  rep.valid_sequences = generated.size();
  rep.quality = quality_metrics(result.sequences, options.grammar);
  rep.control = controllability_metrics(result.sequences, result.requests, options.grammar);

  std::vector<std::string> short_categories;
  for (const auto& c : categories) {
    if (have[c] < static_cast<std::size_t>(options.min_per_category)) short_categories.push_back(c);
  }
  if (options.strict && !short_categories.empty()) {
    throw Error(ErrorCode::InsufficientValidSamples,
                fmt::format("category '{}' appeared in {} valid sequences, needs {}", short_categories.front(),
                            have[short_categories.front()], options.min_per_category));
  }

  result.truth.relation = relation_prior(ground_truth, categories, options.epsilon, options.multiplicity);
  result.model.relation = relation_prior(generated, categories, options.epsilon, options.multiplicity);
  for (std::size_t ci = 0; ci < C; ++ci) {
    const std::string& c = categories[ci];
    CategoryKl row;
    row.category = c;
    row.valid_sequences = have[c];
    const LocationPrior p_loc = location_prior(ground_truth, c, options.grid, options.epsilon);
    const ShapePrior p_shape = shape_prior(ground_truth, c, options.bins, options.epsilon);
    result.truth.location.push_back(p_loc);
    result.truth.shape.push_back(p_shape);
    if (have[c] == 0) {
      rep.skipped.push_back(c);
      rep.per_category.push_back(row);
      continue;
    }
    const LocationPrior q_loc = location_prior(generated, c, options.grid, options.epsilon);
    row.location = kl_divergence(p_loc.cells, q_loc.cells);
    result.model.location.push_back(q_loc);
    try {
      const ShapePrior q_shape = shape_prior(generated, c, options.bins, options.epsilon);
      row.shape = kl_divergence(p_shape.mass, q_shape.mass);
      result.model.shape.push_back(q_shape);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoInstances) throw;
    }
    if (C >= 2) {
      std::vector<double> p_row, q_row;
      for (std::size_t j = 0; j < C; ++j) {
        if (j == ci) continue;
        p_row.push_back(result.truth.relation.matrix[ci * C + j]);
        q_row.push_back(result.model.relation.matrix[ci * C + j]);
      }
      row.relation = kl_divergence(p_row, q_row);
    }
    rep.per_category.push_back(row);
  }
  rep.location_kl = mean_of(rep.per_category, &CategoryKl::location);
  rep.shape_kl = mean_of(rep.per_category, &CategoryKl::shape);
  rep.relation_kl = mean_of(rep.per_category, &CategoryKl::relation);
  return result;
}

void write_priors(const std::filesystem::path& dir, const std::string& prefix, const EvalPriors& priors) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream out(dir / name);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open(prefix + "_location.txt");
    for (const auto& p : priors.location) {
      out << "# " << p.category << " grid " << p.grid << "\n";
      for (int y = 0; y < p.grid; ++y) {
        for (int x = 0; x < p.grid; ++x) {
          out << (x ? " " : "") << fmt::format("{:.6e}", p.cells[static_cast<std::size_t>(y * p.grid + x)]);
        }
        out << "\n";
      }
    }
  }
  {
    auto out = open(prefix + "_shape.txt");
    for (const auto& p : priors.shape) {
      out << "# " << p.category << " bins " << p.mass.size() << "\n";
      for (std::size_t i = 0; i < p.mass.size(); ++i) {
        out << fmt::format("{:.6f} {:.6f} {:.6e}\n", p.edges[i], p.edges[i + 1], p.mass[i]);
      }
    }
  }
  {
    auto out = open(prefix + "_relation.txt");
    const auto& r = priors.relation;
    out << "#";
    for (const auto& c : r.categories) out << "\t" << c;
    out << "\n";
    const std::size_t c = r.categories.size();
    for (std::size_t i = 0; i < c; ++i) {
      for (std::size_t j = 0; j < c; ++j) out << (j ? " " : "") << fmt::format("{:.6e}", r.matrix[i * c + j]);
      out << "\n";
    }
  }
}

}  // namespace layoutprior
