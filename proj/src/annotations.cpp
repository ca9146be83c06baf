#include "layoutprior/annotations.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "layoutprior/error.hpp"

namespace layoutprior {

using nlohmann::json;

// ---------------------------------------------------------------------------
// scene helpers

std::string_view to_string(AnnotationType t) {
  switch (t) {
    case AnnotationType::Box: return "box";
    case AnnotationType::Keypoint: return "key point";
    case AnnotationType::Mask: return "mask";
  }
  return "box";
}

std::string_view to_string(DataType t) {
  return t == DataType::ObjectCentric ? "object centric" : "multiple instances";
}

std::string_view to_string(SizeFlag s) {
  switch (s) {
    case SizeFlag::Small: return "small";
    case SizeFlag::Medium: return "medium";
    case SizeFlag::Large: return "large";
  }
  return "large";
}

std::optional<AnnotationType> parse_annotation_type(std::string_view s) {
  if (s == "box") return AnnotationType::Box;
  if (s == "key point" || s == "keypoint") return AnnotationType::Keypoint;
  if (s == "mask") return AnnotationType::Mask;
  return std::nullopt;
}

std::optional<DataType> parse_data_type(std::string_view s) {
  if (s == "object centric") return DataType::ObjectCentric;
  if (s == "multiple instances") return DataType::MultipleInstances;
  return std::nullopt;
}

std::optional<SizeFlag> parse_size_flag(std::string_view s) {
  if (s == "small") return SizeFlag::Small;
  if (s == "medium") return SizeFlag::Medium;
  if (s == "large") return SizeFlag::Large;
  return std::nullopt;
}

AnnotationType geometry_type(const Geometry& g) {
  switch (g.index()) {
    case 0: return AnnotationType::Box;
    case 1: return AnnotationType::Keypoint;
    default: return AnnotationType::Mask;
  }
}

namespace {

Box bounds_of(const std::vector<Point>& pts, bool visible_only) {
  bool any = false;
  Box b;
  for (const Point& p : pts) {
    if (visible_only && !p.visible()) continue;
    if (!any) {
      b = {p.x, p.y, p.x, p.y};
      any = true;
    } else {
      b.xmin = std::min(b.xmin, p.x);
      b.ymin = std::min(b.ymin, p.y);
      b.xmax = std::max(b.xmax, p.x);
      b.ymax = std::max(b.ymax, p.y);
    }
  }
  return b;
}

}  // namespace

Box bounding_box(const Geometry& g) {
  if (const auto* b = std::get_if<Box>(&g)) {
    return {std::min(b->xmin, b->xmax), std::min(b->ymin, b->ymax), std::max(b->xmin, b->xmax),
            std::max(b->ymin, b->ymax)};
  }
  if (const auto* k = std::get_if<Keypoints>(&g)) return bounds_of(k->joints, true);
  return bounds_of(std::get<MaskContour>(g).points, false);
}

double area(const Box& b) {
  return static_cast<double>(b.xmax - b.xmin) * static_cast<double>(b.ymax - b.ymin);
}

bool same_scene(const SceneRecord& a, const SceneRecord& b) {
  if (a.annotation_type != b.annotation_type || a.data_type != b.data_type ||
      a.size_flag != b.size_flag || a.n_keypoints != b.n_keypoints ||
      a.instances.size() != b.instances.size()) {
    return false;
  }
  auto x = a.instances;
  auto y = b.instances;
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  return x == y;
}

// ---------------------------------------------------------------------------
// ingest stats

IngestStats& IngestStats::operator+=(const IngestStats& o) {
  images_seen += o.images_seen;
  images_kept += o.images_kept;
  images_without_instances += o.images_without_instances;
  instances_seen += o.instances_seen;
  instances_kept += o.instances_kept;
  dropped_crowd += o.dropped_crowd;
  dropped_few_keypoints += o.dropped_few_keypoints;
  dropped_unsupported += o.dropped_unsupported;
  dropped_degenerate += o.dropped_degenerate;
  return *this;
}

std::string IngestStats::manifest() const {
  std::ostringstream out;
  out << "images_seen = " << images_seen << "\n"
      << "images_kept = " << images_kept << "\n"
      << "images_without_instances = " << images_without_instances << "\n"
      << "instances_seen = " << instances_seen << "\n"
      << "instances_kept = " << instances_kept << "\n"
      << "dropped_crowd = " << dropped_crowd << "\n"
      << "dropped_few_keypoints = " << dropped_few_keypoints << "\n"
      << "dropped_unsupported = " << dropped_unsupported << "\n"
      << "dropped_degenerate = " << dropped_degenerate << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// COCO loader

namespace {

[[noreturn]] void schema(const std::string& what) {
  throw Error(ErrorCode::SchemaViolation, "annotation schema: " + what);
}

const json& require(const json& obj, const char* key, const char* where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) schema(std::string(where) + " missing '" + key + "'");
  return *it;
}

double require_number(const json& obj, const char* key, const char* where) {
  const json& v = require(obj, key, where);
  if (!v.is_number()) schema(std::string(where) + " field '" + key + "' is not a number");
  return v.get<double>();
}

std::string id_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return v.dump();
  schema("id is neither a number nor a string");
}

double clampd(double v, double hi) { return std::clamp(v, 0.0, hi); }

// COCO order: nose, l_eye, r_eye, l_ear, r_ear, l_sho, r_sho, l_elb, r_elb,
// l_wri, r_wri, l_hip, r_hip, l_knee, r_knee, l_ank, r_ank.
// 18-joint order: nose, neck, r_sho, r_elb, r_wri, l_sho, l_elb, l_wri,
// r_hip, r_knee, r_ank, l_hip, l_knee, l_ank, r_eye, l_eye, r_ear, l_ear.
constexpr std::array<int, 18> kCoco17To18 = {0, -1, 6, 8, 10, 5, 7, 9, 12, 14, 16, 11, 13, 15, 2, 1, 4, 3};

std::vector<RawKeypoint> coco17_to_18(const std::vector<RawKeypoint>& in) {
  std::vector<RawKeypoint> out(18);
  for (std::size_t i = 0; i < 18; ++i) {
    if (kCoco17To18[i] >= 0) out[i] = in[static_cast<std::size_t>(kCoco17To18[i])];
  }
  const RawKeypoint& ls = in[5];
  const RawKeypoint& rs = in[6];
  if (ls.visible && rs.visible) out[1] = {(ls.x + rs.x) / 2.0, (ls.y + rs.y) / 2.0, true};
  return out;
}

struct ImageSlot {
  RawImageAnnotation image;
  std::size_t seen = 0;
};

}  // namespace

LoadResult load_annotations_from_string(const std::string& json_text, AnnotationType kind) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedFile, std::string("annotation file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) schema("top level is not an object");
  const json& images = require(doc, "images", "file");
  const json& annotations = require(doc, "annotations", "file");
  const json& categories = require(doc, "categories", "file");
  if (!images.is_array() || !annotations.is_array() || !categories.is_array()) {
    schema("images/annotations/categories must be arrays");
  }

  std::map<std::string, std::string> category_names;
  for (const json& c : categories) {
    category_names[id_string(require(c, "id", "category"))] =
        require(c, "name", "category").get<std::string>();
  }

  std::vector<ImageSlot> slots;
  std::map<std::string, std::size_t> slot_of;
  for (const json& im : images) {
    ImageSlot slot;
    slot.image.image_id = id_string(require(im, "id", "image"));
    slot.image.width = require_number(im, "width", "image");
    slot.image.height = require_number(im, "height", "image");
    if (!(slot.image.width > 0) || !(slot.image.height > 0)) {
      schema("image " + slot.image.image_id + " has non-positive size");
    }
    slot_of[slot.image.image_id] = slots.size();
    slots.push_back(std::move(slot));
  }

  LoadResult result;
  IngestStats& stats = result.stats;
  stats.images_seen = slots.size();

  for (const json& ann : annotations) {
    const std::string image_id = id_string(require(ann, "image_id", "annotation"));
    const std::string category_id = id_string(require(ann, "category_id", "annotation"));
    auto sit = slot_of.find(image_id);
    if (sit == slot_of.end()) schema("annotation references unknown image " + image_id);
    auto cit = category_names.find(category_id);
    if (cit == category_names.end()) schema("annotation references unknown category " + category_id);
    ImageSlot& slot = slots[sit->second];
    const double w = slot.image.width;
    const double h = slot.image.height;
    ++stats.instances_seen;
    ++slot.seen;

    if (ann.value("iscrowd", 0) != 0) {
      ++stats.dropped_crowd;
      continue;
    }

    RawInstance inst;
    inst.category = cit->second;
    if (kind == AnnotationType::Box) {
      const json& bbox = require(ann, "bbox", "annotation");
      if (!bbox.is_array() || bbox.size() != 4) schema("bbox must have 4 numbers");
      const double x = bbox[0].get<double>(), y = bbox[1].get<double>();
      const double bw = bbox[2].get<double>(), bh = bbox[3].get<double>();
      if (bw < 0 || bh < 0) schema("bbox has negative extent");
      inst.geometry = RawBox{clampd(x, w), clampd(y, h), clampd(x + bw, w), clampd(y + bh, h)};
    } else if (kind == AnnotationType::Keypoint) {
      auto kit = ann.find("keypoints");
      if (kit == ann.end() || !kit->is_array() || kit->empty()) {
        ++stats.dropped_unsupported;
        continue;
      }
      const json& flat = *kit;
      if (flat.size() % 3 != 0) schema("keypoints length is not a multiple of 3");
      const std::size_t count = flat.size() / 3;
      if (count != 14 && count != 17 && count != 18) {
        schema("unsupported keypoint count " + std::to_string(count));
      }
      std::vector<RawKeypoint> joints(count);
      int labeled = 0;
      for (std::size_t j = 0; j < count; ++j) {
        const double v = flat[3 * j + 2].get<double>();
        joints[j] = {clampd(flat[3 * j].get<double>(), w), clampd(flat[3 * j + 1].get<double>(), h), v > 0};
        labeled += v > 0 ? 1 : 0;
      }
      if (labeled < kMinLabeledKeypoints) {
        ++stats.dropped_few_keypoints;
        continue;
      }
      if (count == 17) joints = coco17_to_18(joints);
      inst.geometry = RawKeypoints{std::move(joints)};
    } else {
      auto sgit = ann.find("segmentation");
      if (sgit == ann.end() || !sgit->is_array() || sgit->empty()) {
        ++stats.dropped_unsupported;  // RLE objects land here
        continue;
      }
      const json* best = nullptr;
      for (const json& poly : *sgit) {
        if (!poly.is_array()) schema("segmentation polygon must be an array");
        if (best == nullptr || poly.size() > best->size()) best = &poly;
      }
      if (best->size() % 2 != 0) schema("segmentation polygon has odd length");
      if (best->size() < 6) {
        ++stats.dropped_unsupported;
        continue;
      }
      RawPolygon poly;
      for (std::size_t j = 0; j + 1 < best->size(); j += 2) {
        poly.vertices.push_back({clampd((*best)[j].get<double>(), w), clampd((*best)[j + 1].get<double>(), h)});
      }
      inst.geometry = std::move(poly);
    }
    slot.image.instances.push_back(std::move(inst));
  }

  for (ImageSlot& slot : slots) {
    if (slot.image.instances.empty()) {
      ++stats.images_without_instances;
      continue;
    }
    stats.instances_kept += slot.image.instances.size();
    result.images.push_back(std::move(slot.image));
  }
  stats.images_kept = result.images.size();
  if (result.images.empty()) throw Error(ErrorCode::EmptyDataset, "no image with usable instances");
  return result;
}

LoadResult load_annotations(const std::filesystem::path& path, AnnotationType kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open annotation file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_annotations_from_string(buf.str(), kind);
}

// ---------------------------------------------------------------------------
// canvas mapping

CanvasTransform compute_transform(double width, double height) {
  CanvasTransform t;
  const double long_side = std::max(width, height);
  const double short_side = std::min(width, height);
  t.scale = static_cast<double>(kCanvasSize) / long_side;
  const int scaled_short = static_cast<int>(std::round(short_side * t.scale));
  const int pad = (kCanvasSize - scaled_short) / 2;
  if (width >= height) {
    t.pad_y = pad;
  } else {
    t.pad_x = pad;
  }
  return t;
}

int quantize_coordinate(double c) {
  const double r = std::round(c);  // half away from zero
  return static_cast<int>(std::clamp(r, 0.0, static_cast<double>(kCanvasSize)));
}

QuantizeResult quantize_scene(const RawImageAnnotation& raw, const QuantizeOptions& options) {
  const CanvasTransform t = compute_transform(raw.width, raw.height);
  auto qx = [&](double x) { return quantize_coordinate(x * t.scale + t.pad_x); };
  auto qy = [&](double y) { return quantize_coordinate(y * t.scale + t.pad_y); };

  QuantizeResult result;
  SceneRecord rec;
  rec.data_type = options.data_type;
  std::optional<AnnotationType> type;
  for (const RawInstance& inst : raw.instances) {
    const AnnotationType this_type = inst.geometry.index() == 0   ? AnnotationType::Box
                                     : inst.geometry.index() == 1 ? AnnotationType::Keypoint
                                                                  : AnnotationType::Mask;
    if (type && *type != this_type) {
      throw Error(ErrorCode::UnsupportedGeometry, "image " + raw.image_id + " mixes annotation types");
    }
    type = this_type;

    Instance out;
    out.category = inst.category;
    if (const auto* b = std::get_if<RawBox>(&inst.geometry)) {
      Box q{qx(b->xmin), qy(b->ymin), qx(b->xmax), qy(b->ymax)};
      if (q.xmin == q.xmax || q.ymin == q.ymax) {
        ++result.dropped_degenerate;
        continue;
      }
      out.geometry = q;
    } else if (const auto* k = std::get_if<RawKeypoints>(&inst.geometry)) {
      Keypoints q;
      q.joints.reserve(k->joints.size());
      for (const RawKeypoint& j : k->joints) {
        q.joints.push_back(j.visible ? Point{qx(j.x), qy(j.y)} : Point{0, 0});
      }
      rec.n_keypoints = static_cast<int>(q.joints.size());
      out.geometry = std::move(q);
    } else {
      const auto& poly = std::get<RawPolygon>(inst.geometry);
      std::vector<Point> q;
      q.reserve(poly.vertices.size());
      for (const RawPoint& v : poly.vertices) q.push_back({qx(v.x), qy(v.y)});
      if (q.size() < 3 || polygon_area(q) == 0.0) {
        ++result.dropped_degenerate;
        continue;
      }
      out.geometry = MaskContour{polar_sample_mask(q, options.mask_points)};
    }
    rec.instances.push_back(std::move(out));
  }
  if (rec.instances.empty()) return result;
  rec.annotation_type = *type;
  rec.size_flag = classify_size(rec.instances);
  result.record = std::move(rec);
  return result;
}

// ---------------------------------------------------------------------------
// size flag

SizeFlag classify_size(double average_area) {
  if (average_area < 32.0 * 32.0) return SizeFlag::Small;
  if (average_area < 96.0 * 96.0) return SizeFlag::Medium;
  return SizeFlag::Large;
}

double average_area(std::span<const Instance> instances) {
  if (instances.empty()) throw Error(ErrorCode::EmptyScene, "average area of an empty scene");
  double total = 0.0;
  for (const Instance& inst : instances) total += area(bounding_box(inst.geometry));
  return total / static_cast<double>(instances.size());
}

SizeFlag classify_size(std::span<const Instance> instances) {
  return classify_size(average_area(instances));
}

// ---------------------------------------------------------------------------

DatasetRecords ingest_dataset(const std::filesystem::path& path, AnnotationType kind,
                              const QuantizeOptions& options) {
  LoadResult loaded = load_annotations(path, kind);
  DatasetRecords out;
  out.stats = loaded.stats;
  out.stats.images_kept = 0;
  out.stats.instances_kept = 0;
  for (const RawImageAnnotation& img : loaded.images) {
    QuantizeResult q = quantize_scene(img, options);
    out.stats.dropped_degenerate += q.dropped_degenerate;
    if (!q.record) {
      ++out.stats.images_without_instances;
      continue;
    }
    out.stats.instances_kept += q.record->instances.size();
    ++out.stats.images_kept;
    out.records.push_back(std::move(*q.record));
  }
  if (out.records.empty()) throw Error(ErrorCode::EmptyDataset, "no image survived quantization: " + path.string());
  return out;
}

}  // namespace layoutprior
