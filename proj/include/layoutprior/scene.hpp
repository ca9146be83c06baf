#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace layoutprior {

/// Side length of the square canvas every scene is mapped onto; also the
/// largest coordinate value (coordinates live in [0, kCanvasSize]).
inline constexpr int kCanvasSize = 512;
inline constexpr int kDefaultMaskPoints = 36;

enum class AnnotationType { Box, Keypoint, Mask };
enum class DataType { ObjectCentric, MultipleInstances };
enum class SizeFlag { Small, Medium, Large };

std::string_view to_string(AnnotationType t);
std::string_view to_string(DataType t);
std::string_view to_string(SizeFlag s);
std::optional<AnnotationType> parse_annotation_type(std::string_view s);
std::optional<DataType> parse_data_type(std::string_view s);
std::optional<SizeFlag> parse_size_flag(std::string_view s);

struct Point {
  int x = 0;
  int y = 0;

  bool visible() const { return x != 0 || y != 0; }
  friend bool operator==(const Point&, const Point&) = default;
  friend auto operator<=>(const Point&, const Point&) = default;
};

struct Box {
  int xmin = 0;
  int ymin = 0;
  int xmax = 0;
  int ymax = 0;

  friend bool operator==(const Box&, const Box&) = default;
  friend auto operator<=>(const Box&, const Box&) = default;
};

/// Joint list in dataset-native order; (0,0) marks an invisible joint.
struct Keypoints {
  std::vector<Point> joints;

  friend bool operator==(const Keypoints&, const Keypoints&) = default;
  friend auto operator<=>(const Keypoints&, const Keypoints&) = default;
};

/// Boundary points produced by polar sampling, ordered by angle.
struct MaskContour {
  std::vector<Point> points;

  friend bool operator==(const MaskContour&, const MaskContour&) = default;
  friend auto operator<=>(const MaskContour&, const MaskContour&) = default;
};

using Geometry = std::variant<Box, Keypoints, MaskContour>;

struct Instance {
  std::string category;
  Geometry geometry;

  friend bool operator==(const Instance&, const Instance&) = default;
  friend auto operator<=>(const Instance&, const Instance&) = default;
};

struct SceneRecord {
  AnnotationType annotation_type = AnnotationType::Box;
  DataType data_type = DataType::MultipleInstances;
  SizeFlag size_flag = SizeFlag::Large;
  int n_keypoints = 0;
  std::vector<Instance> instances;

  std::size_t n_instances() const { return instances.size(); }
  friend bool operator==(const SceneRecord&, const SceneRecord&) = default;
};

AnnotationType geometry_type(const Geometry& g);

/// Tight bounding box. Keypoints use visible joints only; an all-invisible
/// keypoint set yields an all-zero box.
Box bounding_box(const Geometry& g);
double area(const Box& b);

/// Instance order-insensitive comparison.
bool same_scene(const SceneRecord& a, const SceneRecord& b);

}  // namespace layoutprior
