#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "layoutprior/evalsuite.hpp"
#include "layoutprior/scene.hpp"

namespace layoutprior {

using SkeletonEdges = std::vector<std::pair<int, int>>;

/// 18-joint order: nose, neck, r_shoulder, r_elbow, r_wrist, l_shoulder,
/// l_elbow, l_wrist, r_hip, r_knee, r_ankle, l_hip, l_knee, l_ankle, r_eye,
/// l_eye, r_ear, l_ear (letters a..r).
SkeletonEdges skeleton_edges_18();
/// 14-joint order: l_shoulder, r_shoulder, l_elbow, r_elbow, l_wrist,
/// r_wrist, l_hip, r_hip, l_knee, r_knee, l_ankle, r_ankle, head, neck
/// (letters a..n).
SkeletonEdges skeleton_edges_14();

struct RenderStyle {
  int canvas = kCanvasSize;
  double stroke_width = 2.0;
  int font_size = 12;
  double joint_radius = 3.0;
  SkeletonEdges edges_18 = skeleton_edges_18();
  SkeletonEdges edges_14 = skeleton_edges_14();
};

/// "#rrggbb" derived from a hash of the name.
std::string category_color(const std::string& category);

/// SVG 1.1 document; byte-identical for identical inputs.
std::string render_svg(const SceneRecord& record, const RenderStyle& style = {});

/// 16 hex digits; FNV-1a over the in-order template-a serialization.
std::string record_hash(const SceneRecord& record);

std::uint64_t fnv1a(std::string_view bytes);

/// Grayscale heatmap of a location prior scaled to its largest cell.
std::string render_location_svg(const LocationPrior& prior, int canvas = kCanvasSize);
/// Bar chart of a shape histogram scaled to its largest bin.
std::string render_shape_svg(const ShapePrior& prior, int width = kCanvasSize, int height = 256);

}  // namespace layoutprior
