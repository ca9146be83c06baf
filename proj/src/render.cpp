#include "layoutprior/render.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "layoutprior/grammar.hpp"

namespace layoutprior {

namespace {

std::string escape_xml(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

int clamp_to(int v, int canvas) { return std::clamp(v, 0, canvas); }

std::string label(const std::string& category, int x, int y, const std::string& color, const RenderStyle& style) {
  const int lx = clamp_to(x, style.canvas);
  const int ly = std::clamp(y - 3, style.font_size, style.canvas);
  return fmt::format("  <text x=\"{}\" y=\"{}\" fill=\"{}\" font-family=\"sans-serif\" font-size=\"{}\">{}</text>\n",
                     lx, ly, color, style.font_size, escape_xml(category));
}

}  // namespace

SkeletonEdges skeleton_edges_18() {
  return {{1, 2},  {1, 5},  {2, 3},  {3, 4},   {5, 6},   {6, 7},   {1, 8},   {8, 9},  {9, 10},
          {1, 11}, {11, 12}, {12, 13}, {1, 0}, {0, 14}, {14, 16}, {0, 15}, {15, 17}, {8, 11}};
}

SkeletonEdges skeleton_edges_14() {
  return {{12, 13}, {13, 0}, {13, 1}, {0, 2}, {2, 4}, {1, 3}, {3, 5},
          {0, 6},   {1, 7},  {6, 8},  {8, 10}, {7, 9}, {9, 11}};
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string category_color(const std::string& category) {
  const std::uint64_t h = fnv1a(category);
  // HSL with fixed saturation/lightness keeps labels readable on white.
  const double hue = static_cast<double>(h % 360);
  const double s = 0.65, l = 0.45;
  const double c = (1.0 - std::abs(2.0 * l - 1.0)) * s;
  const double hp = hue / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else { r = c; b = x; }
  const double m = l - c / 2.0;
  auto byte = [m](double v) { return static_cast<int>(std::lround((v + m) * 255.0)); };
  return fmt::format("#{:02x}{:02x}{:02x}", byte(r), byte(g), byte(b));
}

std::string render_svg(const SceneRecord& record, const RenderStyle& style) {
  const int W = style.canvas;
  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{0}\" height=\"{0}\" viewBox=\"0 0 {0} {0}\">\n",
      W);
  for (const Instance& inst : record.instances) {
    const std::string color = category_color(inst.category);
    out += fmt::format(" <g class=\"instance\" stroke=\"{}\">\n", color);
    if (const auto* b = std::get_if<Box>(&inst.geometry)) {
      const int x0 = clamp_to(b->xmin, W), y0 = clamp_to(b->ymin, W);
      const int x1 = clamp_to(b->xmax, W), y1 = clamp_to(b->ymax, W);
      out += fmt::format("  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke-width=\"{}\"/>\n", x0,
                         y0, std::max(0, x1 - x0), std::max(0, y1 - y0), style.stroke_width);
      out += label(inst.category, x0, y0, color, style);
    } else if (const auto* k = std::get_if<Keypoints>(&inst.geometry)) {
      const auto& j = k->joints;
      const SkeletonEdges* edges = j.size() == 18 ? &style.edges_18 : j.size() == 14 ? &style.edges_14 : nullptr;
      if (edges) {
        for (const auto& [a, b] : *edges) {
          if (a >= static_cast<int>(j.size()) || b >= static_cast<int>(j.size())) continue;
          const Point& p = j[static_cast<std::size_t>(a)];
          const Point& q = j[static_cast<std::size_t>(b)];
          if (!p.visible() || !q.visible()) continue;
          out += fmt::format("  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke-width=\"{}\"/>\n", clamp_to(p.x, W),
                             clamp_to(p.y, W), clamp_to(q.x, W), clamp_to(q.y, W), style.stroke_width);
        }
      }
      for (const Point& p : j) {
        if (!p.visible()) continue;
        out += fmt::format("  <circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{}\"/>\n", clamp_to(p.x, W), clamp_to(p.y, W),
                           style.joint_radius, color);
      }
      const Box bb = bounding_box(inst.geometry);
      out += label(inst.category, bb.xmin, bb.ymin, color, style);
    } else {
      const auto& pts = std::get<MaskContour>(inst.geometry).points;
      std::string coords;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        coords += fmt::format("{}{},{}", i ? " " : "", clamp_to(pts[i].x, W), clamp_to(pts[i].y, W));
      }
      out += fmt::format("  <polygon points=\"{}\" fill=\"{}\" fill-opacity=\"0.25\" stroke-width=\"{}\"/>\n", coords,
                         color, style.stroke_width);
      const Box bb = bounding_box(inst.geometry);
      out += label(inst.category, bb.xmin, bb.ymin, color, style);
    }
    out += " </g>\n";
  }
  out += "</svg>\n";
  return out;
}

std::string record_hash(const SceneRecord& record) {
  GrammarOptions opts;
  for (const Instance& inst : record.instances) {
    if (const auto* m = std::get_if<MaskContour>(&inst.geometry)) opts.mask_points = static_cast<int>(m->points.size());
  }
  return fmt::format("{:016x}", fnv1a(serialize_in_order(record, Template::A, opts).text));
}

std::string render_location_svg(const LocationPrior& prior, int canvas) {
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{0}\" height=\"{0}\" viewBox=\"0 0 {0} {0}\">\n",
      canvas);
  out += fmt::format(" <title>{}</title>\n", escape_xml(prior.category));
  const double peak = prior.cells.empty() ? 0.0 : *std::max_element(prior.cells.begin(), prior.cells.end());
  const double cell = static_cast<double>(canvas) / std::max(prior.grid, 1);
  for (int y = 0; y < prior.grid; ++y) {
    for (int x = 0; x < prior.grid; ++x) {
      const double v = peak > 0.0 ? prior.cells[static_cast<std::size_t>(y * prior.grid + x)] / peak : 0.0;
      const int level = static_cast<int>(std::lround(255.0 * v));
      out += fmt::format(" <rect x=\"{:.3f}\" y=\"{:.3f}\" width=\"{:.3f}\" height=\"{:.3f}\" fill=\"#{:02x}{:02x}{:02x}\"/>\n",
                         x * cell, y * cell, cell, cell, level, level, level);
    }
  }
  out += "</svg>\n";
  return out;
}

std::string render_shape_svg(const ShapePrior& prior, int width, int height) {
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n",
      width, height);
  out += fmt::format(" <title>{}</title>\n", escape_xml(prior.category));
  const double peak = prior.mass.empty() ? 0.0 : *std::max_element(prior.mass.begin(), prior.mass.end());
  const double bar = static_cast<double>(width) / std::max<std::size_t>(prior.mass.size(), 1);
  for (std::size_t i = 0; i < prior.mass.size(); ++i) {
    const double h = peak > 0.0 ? height * prior.mass[i] / peak : 0.0;
    out += fmt::format(" <rect x=\"{:.3f}\" y=\"{:.3f}\" width=\"{:.3f}\" height=\"{:.3f}\" fill=\"{}\"/>\n",
                       static_cast<double>(i) * bar, height - h, bar, h, category_color(prior.category));
  }
  out += "</svg>\n";
  return out;
}

}  // namespace layoutprior
