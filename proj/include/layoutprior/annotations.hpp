#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "layoutprior/scene.hpp"

namespace layoutprior {

// Raw annotations in original image pixels.

struct RawPoint {
  double x = 0;
  double y = 0;
};

struct RawBox {
  double xmin = 0;
  double ymin = 0;
  double xmax = 0;
  double ymax = 0;
};

struct RawKeypoint {
  double x = 0;
  double y = 0;
  bool visible = false;
};

struct RawKeypoints {
  std::vector<RawKeypoint> joints;  // 14 or 18 entries
};

struct RawPolygon {
  std::vector<RawPoint> vertices;
};

using RawGeometry = std::variant<RawBox, RawKeypoints, RawPolygon>;

struct RawInstance {
  std::string category;
  RawGeometry geometry;
};

struct RawImageAnnotation {
  std::string image_id;
  double width = 0;
  double height = 0;
  std::vector<RawInstance> instances;
};

/// Instance accounting kept across ingest so that
/// kept + dropped == seen holds for every stage.
struct IngestStats {
  std::size_t images_seen = 0;
  std::size_t images_kept = 0;
  std::size_t images_without_instances = 0;
  std::size_t instances_seen = 0;
  std::size_t instances_kept = 0;
  std::size_t dropped_crowd = 0;
  std::size_t dropped_few_keypoints = 0;
  std::size_t dropped_unsupported = 0;  // RLE masks, missing geometry
  std::size_t dropped_degenerate = 0;   // zero area after quantization

  std::size_t instances_dropped() const {
    return dropped_crowd + dropped_few_keypoints + dropped_unsupported + dropped_degenerate;
  }
  IngestStats& operator+=(const IngestStats& o);
  /// Plain-text key = value report.
  std::string manifest() const;
};

struct LoadResult {
  std::vector<RawImageAnnotation> images;
  IngestStats stats;
};

/// Minimum number of labeled joints for a person instance to be kept.
inline constexpr int kMinLabeledKeypoints = 5;

/// Reads the documented COCO subset: `images` (id, width, height),
/// `annotations` (image_id, category_id, bbox, keypoints, segmentation,
/// iscrowd), `categories` (id, name). 17-joint COCO keypoints are converted
/// to the 18-joint order with a synthesized neck.
LoadResult load_annotations(const std::filesystem::path& path, AnnotationType kind);
LoadResult load_annotations_from_string(const std::string& json_text, AnnotationType kind);

struct CanvasTransform {
  double scale = 1.0;
  int pad_x = 0;
  int pad_y = 0;
};

CanvasTransform compute_transform(double width, double height);

/// round-half-away-from-zero, then clamp to [0, kCanvasSize].
int quantize_coordinate(double c);

struct QuantizeOptions {
  DataType data_type = DataType::MultipleInstances;
  int mask_points = kDefaultMaskPoints;
};

struct QuantizeResult {
  std::optional<SceneRecord> record;  // empty when every instance was dropped
  std::size_t dropped_degenerate = 0;
};

QuantizeResult quantize_scene(const RawImageAnnotation& raw, const QuantizeOptions& options = {});

SizeFlag classify_size(double average_area);
/// Throws EmptyScene for an empty collection.
SizeFlag classify_size(std::span<const Instance> instances);
double average_area(std::span<const Instance> instances);

/// Polar resampling of a polygon boundary: point i is the farthest boundary
/// intersection of the ray from the vertex centroid at angle 2*pi*i/n
/// (angle 0 along +x, increasing toward +y). Rays that miss reuse the
/// nearest preceding hit distance. Throws DegeneratePolygon on zero area.
std::vector<Point> polar_sample_mask(std::span<const Point> polygon, int n = kDefaultMaskPoints);

double polygon_area(std::span<const Point> polygon);

/// Full ingest of one dataset file: load, quantize, collect records.
struct DatasetRecords {
  std::vector<SceneRecord> records;
  IngestStats stats;
};

DatasetRecords ingest_dataset(const std::filesystem::path& path, AnnotationType kind,
                              const QuantizeOptions& options = {});

}  // namespace layoutprior
